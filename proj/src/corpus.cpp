// SPDX-License-Identifier: Apache-2.0
#include "jdagg/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "jdagg/error.hpp"
#include "jdagg/rng.hpp"

namespace jdagg {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Decodes one UTF-8 codepoint starting at i; advances i. Invalid bytes are
// consumed one at a time and returned verbatim so classification stays total.
std::uint32_t next_codepoint(const std::string& s, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  const unsigned char b0 = byte(i);
  if (b0 < 0x80) {
    i += 1;
    return b0;
  }
  if ((b0 >> 5) == 0x6 && i + 1 < s.size()) {
    const std::uint32_t cp = ((b0 & 0x1Fu) << 6) | (byte(i + 1) & 0x3Fu);
    i += 2;
    return cp;
  }
  if ((b0 >> 4) == 0xE && i + 2 < s.size()) {
    const std::uint32_t cp =
        ((b0 & 0x0Fu) << 12) | ((byte(i + 1) & 0x3Fu) << 6) | (byte(i + 2) & 0x3Fu);
    i += 3;
    return cp;
  }
  if ((b0 >> 3) == 0x1E && i + 3 < s.size()) {
    const std::uint32_t cp = ((b0 & 0x07u) << 18) | ((byte(i + 1) & 0x3Fu) << 12) |
                             ((byte(i + 2) & 0x3Fu) << 6) | (byte(i + 3) & 0x3Fu);
    i += 4;
    return cp;
  }
  i += 1;
  return b0;
}

bool is_thai_block(std::uint32_t cp) { return cp >= 0x0E00 && cp <= 0x0E7F; }
bool is_latin_letter(std::uint32_t cp) {
  return (cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z');
}

// Leading list markers: bullet glyphs, "- ", "1. ", "2) ".
// Returns the byte count to strip, or 0.
std::size_t leading_marker_len(const std::string& s) {
  static const std::vector<std::string> kBullets = {"•", "●", "▪", "*"};
  for (const auto& b : kBullets) {
    if (s.compare(0, b.size(), b) == 0) return b.size();
  }
  if (s.size() >= 2 && s[0] == '-' && s[1] == ' ') return 2;
  std::size_t d = 0;
  while (d < s.size() && std::isdigit(static_cast<unsigned char>(s[d]))) ++d;
  if (d > 0 && d + 1 < s.size() && (s[d] == '.' || s[d] == ')') && s[d + 1] == ' ') {
    return d + 2;
  }
  return 0;
}

std::string strip_markers(std::string piece) {
  for (;;) {
    piece = trim(piece);
    const std::size_t n = leading_marker_len(piece);
    if (n == 0) return piece;
    piece.erase(0, n);
  }
}

void require_key(const nlohmann::json& obj, const char* key, std::size_t line_no) {
  if (!obj.contains(key)) {
    throw InputError("line " + std::to_string(line_no) + ": missing key \"" + key + "\"");
  }
}

std::vector<std::string> string_array(const nlohmann::json& value, const char* key,
                                      std::size_t line_no) {
  if (!value.is_array()) {
    throw InputError("line " + std::to_string(line_no) + ": \"" + std::string(key) +
                     "\" must be an array of strings");
  }
  std::vector<std::string> out;
  for (const auto& item : value) {
    if (!item.is_string()) {
      throw InputError("line " + std::to_string(line_no) + ": \"" + std::string(key) +
                       "\" must be an array of strings");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

std::vector<std::string> split_tsv(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  return out;
}

}  // namespace

const char* language_name(Language lang) {
  switch (lang) {
    case Language::Thai: return "thai";
    case Language::English: return "english";
    case Language::CodeSwitched: return "code_switched";
  }
  return "english";
}

Language language_from_name(const std::string& name) {
  if (name == "thai") return Language::Thai;
  if (name == "english") return Language::English;
  if (name == "code_switched") return Language::CodeSwitched;
  throw InputError("unknown language tag \"" + name + "\"");
}

std::vector<std::string> segment_description(const std::string& description,
                                             std::size_t max_segments) {
  if (max_segments < 1) throw UsageError("max_segments must be >= 1");
  std::vector<std::string> segments;
  std::size_t start = 0;
  while (start <= description.size() && segments.size() < max_segments) {
    std::size_t nl = description.find('\n', start);
    if (nl == std::string::npos) nl = description.size();
    std::string piece = strip_markers(description.substr(start, nl - start));
    if (!piece.empty()) segments.push_back(std::move(piece));
    if (nl == description.size()) break;
    start = nl + 1;
  }
  if (segments.empty()) {
    const std::string whole = trim(description);
    segments.push_back(whole.empty() ? "<empty>" : whole);
  }
  return segments;
}

Language detect_language(const std::string& title) {
  if (title.empty()) throw InputError("empty title");
  bool has_thai = false;
  bool has_latin = false;
  std::size_t i = 0;
  while (i < title.size()) {
    const std::uint32_t cp = next_codepoint(title, i);
    has_thai = has_thai || is_thai_block(cp);
    has_latin = has_latin || is_latin_letter(cp);
  }
  if (has_thai && has_latin) return Language::CodeSwitched;
  if (has_thai) return Language::Thai;
  return Language::English;
}

SegmentedPosting segment_posting(const JobPosting& posting, std::size_t max_segments) {
  return SegmentedPosting{posting.id, posting.title,
                          segment_description(posting.description, max_segments),
                          posting.skills};
}

std::vector<JobPosting> load_postings(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<JobPosting> postings;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    }
    require_key(obj, "id", line_no);
    require_key(obj, "title", line_no);
    require_key(obj, "description", line_no);
    JobPosting p;
    try {
      p.id = obj.at("id").get<std::string>();
      p.title = obj.at("title").get<std::string>();
      p.description = obj.at("description").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (obj.contains("skills")) p.skills = string_array(obj.at("skills"), "skills", line_no);
    if (trim(p.title).empty()) {
      throw InputError("line " + std::to_string(line_no) + ": title is empty");
    }
    if (!seen_ids.insert(p.id).second) {
      throw InputError("duplicate posting id \"" + p.id + "\" at line " +
                       std::to_string(line_no));
    }
    p.title_language = detect_language(p.title);
    postings.push_back(std::move(p));
  }
  return postings;
}

void save_postings(const std::vector<JobPosting>& postings, const std::string& path) {
  std::ofstream out = open_output(path);
  for (const auto& p : postings) {
    ordered_json obj;
    obj["id"] = p.id;
    obj["title"] = p.title;
    obj["description"] = p.description;
    obj["skills"] = p.skills;
    out << obj.dump() << "\n";
  }
}

std::vector<SegmentedPosting> load_segmented(const std::string& path,
                                             std::size_t max_segments) {
  std::ifstream in = open_input(path);
  std::vector<SegmentedPosting> postings;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    }
    require_key(obj, "id", line_no);
    require_key(obj, "title", line_no);
    SegmentedPosting p;
    try {
      p.id = obj.at("id").get<std::string>();
      p.title = obj.at("title").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (obj.contains("skills")) p.skills = string_array(obj.at("skills"), "skills", line_no);
    if (obj.contains("segments")) {
      p.segments = string_array(obj.at("segments"), "segments", line_no);
      for (auto& seg : p.segments) {
        seg = trim(seg);
        if (seg.empty()) {
          throw InputError("line " + std::to_string(line_no) + ": empty segment");
        }
      }
      if (p.segments.empty()) {
        throw InputError("line " + std::to_string(line_no) + ": segments array is empty");
      }
      if (p.segments.size() > max_segments) p.segments.resize(max_segments);
    } else {
      require_key(obj, "description", line_no);
      p.segments = segment_description(obj.at("description").get<std::string>(), max_segments);
    }
    if (trim(p.title).empty()) {
      throw InputError("line " + std::to_string(line_no) + ": title is empty");
    }
    if (!seen_ids.insert(p.id).second) {
      throw InputError("duplicate posting id \"" + p.id + "\" at line " +
                       std::to_string(line_no));
    }
    postings.push_back(std::move(p));
  }
  return postings;
}

void save_segmented(const std::vector<SegmentedPosting>& postings, const std::string& path) {
  std::ofstream out = open_output(path);
  for (const auto& p : postings) {
    ordered_json obj;
    obj["id"] = p.id;
    obj["title"] = p.title;
    obj["segments"] = p.segments;
    obj["skills"] = p.skills;
    out << obj.dump() << "\n";
  }
}

std::vector<SynonymSet> load_synonyms(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<SynonymSet> sets;
  std::vector<std::string> order;  // canonical ids in first-seen order
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_tsv(line);
    if (cells.size() < 2 || trim(cells[0]).empty() || trim(cells[1]).empty()) {
      throw InputError("line " + std::to_string(line_no) +
                       ": expected canonical_id<TAB>variant[<TAB>language]");
    }
    SynonymVariant variant;
    variant.text = trim(cells[1]);
    if (cells.size() >= 3 && !trim(cells[2]).empty() && trim(cells[2]) != "auto") {
      variant.language = language_from_name(trim(cells[2]));
    } else {
      variant.language = detect_language(variant.text);
    }
    const std::string canonical = trim(cells[0]);
    auto it = std::find_if(sets.begin(), sets.end(),
                           [&](const SynonymSet& s) { return s.canonical_id == canonical; });
    if (it == sets.end()) {
      sets.push_back(SynonymSet{canonical, {variant}});
    } else {
      it->variants.push_back(variant);
    }
  }
  for (const auto& s : sets) {
    if (s.variants.size() < 2) {
      throw InputError("synonym set \"" + s.canonical_id + "\" has fewer than 2 variants");
    }
  }
  return sets;
}

std::vector<NormalizationPair> load_normalization_pairs(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<NormalizationPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_tsv(line);
    if (cells.size() < 2 || trim(cells[0]).empty() || trim(cells[1]).empty()) {
      throw InputError("line " + std::to_string(line_no) +
                       ": expected raw_title<TAB>standard_label");
    }
    pairs.push_back(NormalizationPair{trim(cells[0]), trim(cells[1])});
  }
  return pairs;
}

namespace {

const std::vector<std::string>& distractor_pool() {
  static const std::vector<std::string> kPool = {
      "Competitive salary and annual bonus",
      "Office located near the central station",
      "Flexible working hours with hybrid options",
      "Collaborate with cross functional teams",
      "Health insurance and provident fund included",
      "Participate in weekly planning meetings",
      "Report progress to the department manager",
      "Support continuous improvement initiatives",
      "Maintain documentation for internal processes",
      "Five day work week with paid vacation",
      "Training budget available for certifications",
      "Company laptop and equipment provided",
      "Assist with onboarding of new team members",
      "Ensure compliance with company policies",
      "Occasional travel to partner sites required",
      "Friendly international working environment",
      "Free lunch and snacks in the office",
      "Annual team retreat and social events",
      "Opportunities for internal promotion",
      "Probation period of three months applies",
  };
  return kPool;
}

const std::vector<std::string>& role_words() {
  static const std::vector<std::string> kRoles = {
      "specialist", "engineer", "analyst", "coordinator", "manager",
      "developer", "consultant", "technician", "designer", "officer",
  };
  return kRoles;
}

std::string synthetic_token(Rng& rng, std::size_t index) {
  static const char* kConsonants = "bcdfgklmnprstvz";
  static const char* kVowels = "aeiou";
  std::string word;
  const std::size_t syllables = 2 + rng.next_below(2);
  for (std::size_t s = 0; s < syllables; ++s) {
    word += kConsonants[rng.next_below(15)];
    word += kVowels[rng.next_below(5)];
  }
  return word + std::to_string(index);  // index suffix guarantees uniqueness
}

}  // namespace

std::vector<JobPosting> generate_synthetic_corpus(std::size_t n_postings, std::uint64_t seed) {
  if (n_postings == 0) throw InputError("n_postings must be >= 1");
  Rng rng(mix_seed(0x6A6461676763ull, seed));  // independent of other streams
  const auto& distractors = distractor_pool();
  const auto& roles = role_words();

  std::vector<JobPosting> postings;
  postings.reserve(n_postings);
  for (std::size_t i = 0; i < n_postings; ++i) {
    JobPosting p;
    const std::string token = synthetic_token(rng, i);
    p.id = "p" + std::to_string(i);
    // The unique token is the whole title: titles stay mutually
    // distinguishable under the hashing encoder, keeping training pairs
    // separable. A role word decorates the informative segment instead.
    p.title = token;

    const std::size_t n_segments = rng.next_range(4, 8);
    const std::size_t title_slot = rng.next_below(n_segments);
    std::string description;
    for (std::size_t s = 0; s < n_segments; ++s) {
      if (s > 0) description += "\n";
      description += "• ";
      if (s == title_slot) {
        description += "Experienced " + token + " " + roles[rng.next_below(roles.size())] +
                       " needed for our growing team";
      } else {
        description += distractors[rng.next_below(distractors.size())];
      }
    }
    p.description = std::move(description);

    const std::size_t n_skills = rng.next_range(2, 5);
    std::set<std::size_t> chosen;
    while (chosen.size() < n_skills) {
      chosen.insert(rng.next_below(kSyntheticSkillVocabulary));
    }
    for (std::size_t c : chosen) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "skill_%03zu", c);
      p.skills.emplace_back(buf);
    }
    p.title_language = detect_language(p.title);
    postings.push_back(std::move(p));
  }
  return postings;
}

}  // namespace jdagg
