// Built-in word lists: English stopwords (apostrophes folded the same way
// the tokenizer folds them) and an emoji alias table.

#include <map>
#include <set>
#include <string>

#include "profvec/preprocess.hpp"

namespace profvec {

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = {
      "i",        "me",       "my",       "myself",   "we",       "our",
      "ours",     "ourselves", "you",     "youre",    "youve",    "youll",
      "youd",     "your",     "yours",    "yourself", "yourselves", "he",
      "him",      "his",      "himself",  "she",      "shes",     "her",
      "hers",     "herself",  "it",       "its",      "itself",   "they",
      "them",     "their",    "theirs",   "themselves", "what",   "which",
      "who",      "whom",     "this",     "that",     "thatll",   "these",
      "those",    "am",       "is",       "are",      "was",      "were",
      "be",       "been",     "being",    "have",     "has",      "had",
      "having",   "do",       "does",     "did",      "doing",    "a",
      "an",       "the",      "and",      "but",      "if",       "or",
      "because",  "as",       "until",    "while",    "of",       "at",
      "by",       "for",      "with",     "about",    "against",  "between",
      "into",     "through",  "during",   "before",   "after",    "above",
      "below",    "to",       "from",     "up",       "down",     "in",
      "out",      "on",       "off",      "over",     "under",    "again",
      "further",  "then",     "once",     "here",     "there",    "when",
      "where",    "why",      "how",      "all",      "any",      "both",
      "each",     "few",      "more",     "most",     "other",    "some",
      "such",     "no",       "nor",      "not",      "only",     "own",
      "same",     "so",       "than",     "too",      "very",     "s",
      "t",        "can",      "will",     "just",     "don",      "dont",
      "should",   "shouldve", "now",      "d",        "ll",       "m",
      "o",        "re",       "ve",       "y",        "ain",      "aren",
      "arent",    "couldn",   "couldnt",  "didn",     "didnt",    "doesn",
      "doesnt",   "hadn",     "hadnt",    "hasn",     "hasnt",    "haven",
      "havent",   "isn",      "isnt",     "ma",       "mightn",   "mightnt",
      "mustn",    "mustnt",   "needn",    "neednt",   "shan",     "shant",
      "shouldn",  "shouldnt", "wasn",     "wasnt",    "weren",    "werent",
      "won",      "wont",     "wouldn",   "wouldnt"};
  return words;
}

const std::map<std::string, std::string>& default_emoji_aliases() {
  static const std::map<std::string, std::string> aliases = {
      {"🔫", "pistol"},
      {"⛽", "fuel_pump"},
      {"💰", "money_bag"},
      {"💸", "money_with_wings"},
      {"💵", "dollar_banknote"},
      {"🔓", "unlocked"},
      {"👮", "police_officer"},
      {"🚓", "police_car"},
      {"🚨", "police_car_light"},
      {"😈", "smiling_face_with_horns"},
      {"👿", "angry_face_with_horns"},
      {"😠", "angry_face"},
      {"😡", "pouting_face"},
      {"🤬", "face_with_symbols_on_mouth"},
      {"💀", "skull"},
      {"⚰", "coffin"},
      {"🔪", "kitchen_knife"},
      {"💣", "bomb"},
      {"💊", "pill"},
      {"🍃", "leaf_fluttering_in_wind"},
      {"🌿", "herb"},
      {"💨", "dashing_away"},
      {"💯", "hundred_points"},
      {"🔥", "fire"},
      {"👑", "crown"},
      {"💎", "gem_stone"},
      {"🤑", "money_mouth_face"},
      {"🖕", "middle_finger"},
      {"💪", "flexed_biceps"},
      {"🙏", "folded_hands"},
      {"🕊", "dove"},
      {"😂", "face_with_tears_of_joy"},
      {"🤣", "rolling_on_the_floor_laughing"},
      {"😭", "loudly_crying_face"},
      {"😩", "weary_face"},
      {"😊", "smiling_face_with_smiling_eyes"},
      {"😍", "smiling_face_with_heart_eyes"},
      {"😘", "face_blowing_a_kiss"},
      {"😎", "smiling_face_with_sunglasses"},
      {"😴", "sleeping_face"},
      {"❤", "red_heart"},
      {"💕", "two_hearts"},
      {"💔", "broken_heart"},
      {"🎶", "musical_notes"},
      {"☕", "hot_beverage"},
      {"🌸", "cherry_blossom"},
      {"🌞", "sun_with_face"},
      {"✨", "sparkles"},
      {"🎉", "party_popper"},
      {"🙌", "raising_hands"},
      {"👌", "ok_hand"},
      {"👍", "thumbs_up"},
      {"🤞", "crossed_fingers"},
      {"🏀", "basketball"},
      {"🏆", "trophy"},
      {"📚", "books"}};
  return aliases;
}

}  // namespace profvec
