// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace jdagg {

enum class Language { Thai, English, CodeSwitched };

const char* language_name(Language lang);
Language language_from_name(const std::string& name);

struct JobPosting {
  std::string id;
  std::string title;
  std::string description;
  std::vector<std::string> skills;
  Language title_language = Language::English;

  bool operator==(const JobPosting&) const = default;
};

struct SegmentedPosting {
  std::string id;
  std::string title;
  std::vector<std::string> segments;
  std::vector<std::string> skills;

  bool operator==(const SegmentedPosting&) const = default;
};

struct SynonymVariant {
  std::string text;
  Language language = Language::English;

  bool operator==(const SynonymVariant&) const = default;
};

struct SynonymSet {
  std::string canonical_id;
  std::vector<SynonymVariant> variants;  // at least two

  bool operator==(const SynonymSet&) const = default;
};

struct NormalizationPair {
  std::string raw_title;
  std::string standard_label;

  bool operator==(const NormalizationPair&) const = default;
};

inline constexpr std::size_t kDefaultMaxSegments = 64;

// Splits a description into segments: newline boundaries first, then leading
// bullet glyphs (•, ●, ▪, *), leading "- ", and leading numbering such as
// "1. " or "2) " are stripped off each piece. Empty pieces are dropped and
// the result is truncated to max_segments. Inputs that produce no segments
// collapse to one segment holding the trimmed text, or "<empty>" when the
// description is entirely whitespace. Total over arbitrary UTF-8.
std::vector<std::string> segment_description(const std::string& description,
                                             std::size_t max_segments = kDefaultMaxSegments);

// Unicode-block classification: Thai block is U+0E00..U+0E7F, Latin letters
// are A-Z/a-z. Mixed input is CodeSwitched; neither falls back to English.
// Throws InputError on an empty title.
Language detect_language(const std::string& title);

SegmentedPosting segment_posting(const JobPosting& posting,
                                 std::size_t max_segments = kDefaultMaxSegments);

// JSONL loaders/writers. One object per line; postings carry keys
// id/title/description/skills, segmented postings id/title/segments/skills.
// Malformed lines and duplicate ids raise InputError naming the line or id.
std::vector<JobPosting> load_postings(const std::string& path);
void save_postings(const std::vector<JobPosting>& postings, const std::string& path);

// Accepts either format: lines with a "segments" array are taken as-is
// (pre-segmented escape hatch), lines with "description" are segmented.
std::vector<SegmentedPosting> load_segmented(const std::string& path,
                                             std::size_t max_segments = kDefaultMaxSegments);
void save_segmented(const std::vector<SegmentedPosting>& postings, const std::string& path);

// TSV: canonical_id <TAB> variant <TAB> language (thai|english|code_switched|auto).
std::vector<SynonymSet> load_synonyms(const std::string& path);

// TSV: raw_title <TAB> standard_label.
std::vector<NormalizationPair> load_normalization_pairs(const std::string& path);

inline constexpr std::size_t kSyntheticSkillVocabulary = 157;

// Deterministic toy corpus: every posting has a unique title token planted in
// exactly one of 4-8 segments; the remaining segments come from a shared
// distractor pool; 2-5 skills are drawn from a 157-tag vocabulary.
std::vector<JobPosting> generate_synthetic_corpus(std::size_t n_postings, std::uint64_t seed);

}  // namespace jdagg
