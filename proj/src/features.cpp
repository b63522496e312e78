#include "profvec/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "profvec/error.hpp"

namespace profvec {

std::string_view to_string(AggregationMethod method) {
  switch (method) {
    case AggregationMethod::sum:
      return "sum";
    case AggregationMethod::avg:
      return "avg";
    case AggregationMethod::sum_count:
      return "sum_count";
    case AggregationMethod::sum_tfidf:
      return "sum_tfidf";
    case AggregationMethod::avg_sum_count:
      return "avg_sum_count";
    case AggregationMethod::baseline_tf:
      return "baseline_tf";
  }
  return "?";
}

std::optional<AggregationMethod> parse_method(std::string_view text) {
  for (auto m : {AggregationMethod::sum, AggregationMethod::avg, AggregationMethod::sum_count,
                 AggregationMethod::sum_tfidf, AggregationMethod::avg_sum_count,
                 AggregationMethod::baseline_tf})
    if (to_string(m) == text) return m;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// idf

IdfTable build_idf(std::span<const TokenizedProfile> training, const Vocabulary& vocab) {
  if (training.empty()) throw ValidationError("idf: no training documents");
  std::vector<std::size_t> df(vocab.size(), 0);
  std::vector<std::uint8_t> seen(vocab.size(), 0);
  std::vector<std::uint32_t> touched;
  for (const auto& p : training) {
    touched.clear();
    for (const auto& t : p.merged_tokens()) {
      auto idx = vocab.find(t);
      if (!idx || seen[*idx]) continue;
      seen[*idx] = 1;
      touched.push_back(*idx);
    }
    for (auto i : touched) {
      ++df[i];
      seen[i] = 0;
    }
  }
  IdfTable table;
  table.n_docs = training.size();
  table.idf.resize(vocab.size());
  const double n = static_cast<double>(training.size());
  for (std::size_t i = 0; i < vocab.size(); ++i)
    table.idf[i] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[i]))) + 1.0;
  return table;
}

void write_idf(const IdfTable& idf, const Vocabulary& vocab, std::ostream& out) {
  char buf[40];
  for (std::uint32_t i = 0; i < vocab.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", idf.idf[i]);
    out << vocab.token(i) << '\t' << buf << '\n';
  }
}

void save_idf(const IdfTable& idf, const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot write idf table");
  write_idf(idf, vocab, out);
}

namespace {

bool parse_double(std::string_view text, double& value) {
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string_view chomp(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
  return line;
}

}  // namespace

IdfTable read_idf(std::istream& in, const Vocabulary& vocab) {
  IdfTable table;
  table.idf.assign(vocab.size(), std::nan(""));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = chomp(line);
    if (text.empty()) continue;
    const auto fields = split_tabs(text);
    double value = 0.0;
    if (fields.size() != 2 || !parse_double(fields[1], value))
      throw ParseError(line_no, "expected 'token<TAB>idf'");
    if (!(value > 0.0)) throw ParseError(line_no, "idf must be positive");
    if (auto idx = vocab.find(fields[0])) table.idf[*idx] = value;
  }
  for (std::uint32_t i = 0; i < vocab.size(); ++i)
    if (std::isnan(table.idf[i]))
      throw ValidationError("idf table has no entry for vocabulary token '" + vocab.token(i) + "'");
  return table;
}

IdfTable load_idf(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open idf table");
  return read_idf(in, vocab);
}

// ---------------------------------------------------------------------------
// Term statistics and aggregation

ProfileTermStats compute_term_stats(const TokenizedProfile& profile, const Vocabulary& vocab,
                                    const IdfTable* idf) {
  std::map<std::uint32_t, std::uint32_t> counts;
  for (const auto& t : profile.merged_tokens())
    if (auto idx = vocab.find(t)) ++counts[*idx];
  ProfileTermStats stats;
  stats.has_tfidf = idf != nullptr;
  stats.terms.reserve(counts.size());
  for (const auto& [index, count] : counts) {
    const double t = idf ? static_cast<double>(count) * idf->idf.at(index) : 0.0;
    stats.terms.push_back({index, count, t});
  }
  return stats;
}

ProfileVector aggregate(const ProfileTermStats& stats, const EmbeddingModel& model,
                        AggregationMethod method) {
  if (method == AggregationMethod::baseline_tf)
    throw ValidationError("aggregate: baseline_tf is not an embedding aggregation");
  if (method == AggregationMethod::sum_tfidf && !stats.has_tfidf)
    throw ValidationError("aggregate: sum_tfidf needs term stats computed with an idf table");

  ProfileVector out;
  out.method = method;
  out.dense.assign(model.dim(), 0.0);
  out.oov_profile = stats.n() == 0;
  if (out.oov_profile) return out;

  for (const auto& term : stats.terms) {
    double weight = 1.0;
    switch (method) {
      case AggregationMethod::sum:
      case AggregationMethod::avg:
        weight = 1.0;
        break;
      case AggregationMethod::sum_count:
      case AggregationMethod::avg_sum_count:
        weight = static_cast<double>(term.count);
        break;
      case AggregationMethod::sum_tfidf:
        weight = term.tfidf;
        break;
      case AggregationMethod::baseline_tf:
        break;
    }
    const auto w = model.vector(term.index);
    for (std::size_t d = 0; d < out.dense.size(); ++d) out.dense[d] += w[d] * weight;
  }
  if (method == AggregationMethod::avg || method == AggregationMethod::avg_sum_count) {
    const double n = static_cast<double>(stats.n());
    for (double& x : out.dense) x /= n;
  }
  return out;
}

ProfileVector baseline_tf_vector(const TokenizedProfile& profile, const Vocabulary& vocab) {
  std::map<std::string, std::uint32_t> counts;
  for (const auto& t : profile.merged_tokens())
    if (vocab.contains(t)) ++counts[t];
  ProfileVector out;
  out.method = AggregationMethod::baseline_tf;
  out.sparse.assign(counts.begin(), counts.end());
  out.oov_profile = out.sparse.empty();
  return out;
}

std::vector<double> baseline_dense(const TokenizedProfile& profile, const Vocabulary& vocab) {
  std::vector<double> row(vocab.size(), 0.0);
  for (const auto& t : profile.merged_tokens())
    if (auto idx = vocab.find(t)) row[*idx] += 1.0;
  return row;
}

ProfileVector vectorize(const TokenizedProfile& profile, const EmbeddingModel& model,
                        AggregationMethod method, const IdfTable* idf) {
  if (method == AggregationMethod::baseline_tf) return baseline_tf_vector(profile, model.vocab);
  return aggregate(compute_term_stats(profile, model.vocab, idf), model, method);
}

// ---------------------------------------------------------------------------
// Feature files

void write_features(std::span<const FeatureRow> rows, std::ostream& out) {
  const bool sparse = !rows.empty() && rows.front().vector.method == AggregationMethod::baseline_tf;
  if (sparse)
    out << "# profvec-features sparse\n";
  else
    out << "# profvec-features dense " << (rows.empty() ? 0 : rows.front().vector.dense.size())
        << '\n';
  char buf[40];
  for (const auto& row : rows) {
    out << row.id << '\t' << to_string(row.label);
    if (sparse) {
      for (const auto& [token, count] : row.vector.sparse) out << '\t' << token << ':' << count;
    } else {
      for (double x : row.vector.dense) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out << '\t' << buf;
      }
    }
    out << '\n';
  }
}

void save_features(std::span<const FeatureRow> rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot write features");
  write_features(rows, out);
}

std::vector<FeatureRow> read_features(std::istream& in) {
  std::vector<FeatureRow> rows;
  std::string line;
  std::size_t line_no = 0;
  std::optional<bool> sparse;
  std::optional<std::size_t> dim;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = chomp(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      std::istringstream header{std::string(text.substr(1))};
      std::string tag, kind;
      header >> tag >> kind;
      if (tag == "profvec-features") {
        if (kind == "sparse") {
          sparse = true;
        } else if (kind == "dense") {
          sparse = false;
          std::size_t k = 0;
          if (header >> k && k > 0) dim = k;
        } else {
          throw ParseError(line_no, "unknown feature layout '" + kind + "'");
        }
      }
      continue;
    }
    const auto fields = split_tabs(text);
    if (fields.size() < 2) throw ParseError(line_no, "expected id and label");
    FeatureRow row;
    row.id = std::string(fields[0]);
    auto label = parse_label(fields[1]);
    if (!label) throw ParseError(line_no, "unknown label '" + std::string(fields[1]) + "'");
    row.label = *label;
    if (!sparse && fields.size() > 2) sparse = fields[2].find(':') != std::string_view::npos;
    if (sparse.value_or(false)) {
      row.vector.method = AggregationMethod::baseline_tf;
      for (std::size_t f = 2; f < fields.size(); ++f) {
        const auto colon = fields[f].rfind(':');
        std::uint32_t count = 0;
        if (colon == std::string_view::npos || colon == 0)
          throw ParseError(line_no, "expected token:count");
        const auto num = fields[f].substr(colon + 1);
        auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), count);
        if (ec != std::errc() || ptr != num.data() + num.size())
          throw ParseError(line_no, "invalid count in '" + std::string(fields[f]) + "'");
        row.vector.sparse.emplace_back(std::string(fields[f].substr(0, colon)), count);
      }
      row.vector.oov_profile = row.vector.sparse.empty();
    } else {
      row.vector.dense.resize(fields.size() - 2);
      for (std::size_t f = 2; f < fields.size(); ++f)
        if (!parse_double(fields[f], row.vector.dense[f - 2]))
          throw ParseError(line_no, "invalid value '" + std::string(fields[f]) + "'");
      if (!dim) dim = row.vector.dense.size();
      if (row.vector.dense.size() != *dim)
        throw ParseError(line_no, "expected " + std::to_string(*dim) + " values, found " +
                                      std::to_string(row.vector.dense.size()));
      row.vector.oov_profile =
          std::all_of(row.vector.dense.begin(), row.vector.dense.end(), [](double x) { return x == 0.0; });
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<FeatureRow> load_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open features");
  return read_features(in);
}

}  // namespace profvec
