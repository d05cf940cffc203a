#pragma once

// Domain types for Blackbird Language Matrices: tasks, chunks, sentence
// records, answer labels, instances, and the context/answer templates of
// the agreement and verb-alternation problems.

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blm/error.hpp"
#include "blm/random.hpp"

namespace blm {

enum class Task { Agreement, Caus, Od };

inline constexpr std::array<Task, 3> kAllTasks{Task::Agreement, Task::Caus,
                                               Task::Od};

enum class LexType { TypeI, TypeII, TypeIII };

enum class ChunkRole {
  NpSubj,
  Pp1,
  Pp2,
  Vp,
  Ag,
  Pat,
  AktV,
  PassV,
  PNp,
  DaNp,
  DaAg,
  DaPat,
};

enum class Number { Sg, Pl, NA };

enum class AnswerLabel {
  Correct,
  // agreement
  Coord,
  WNA,
  WN1,
  WN2,
  AEV,
  AEN1,
  AEN2,
  // alternations
  IInt,
  ERPass,
  IERPass,
  RTrans,
  IRTrans,
  EWrBy,
  IEWrBy,
};

inline constexpr std::array<AnswerLabel, 15> kAllLabels{
    AnswerLabel::Correct, AnswerLabel::Coord,   AnswerLabel::WNA,    AnswerLabel::WN1,
    AnswerLabel::WN2,     AnswerLabel::AEV,     AnswerLabel::AEN1,   AnswerLabel::AEN2,
    AnswerLabel::IInt,    AnswerLabel::ERPass,  AnswerLabel::IERPass, AnswerLabel::RTrans,
    AnswerLabel::IRTrans, AnswerLabel::EWrBy,   AnswerLabel::IEWrBy};

inline constexpr std::size_t kContextSize = 7;
inline constexpr std::size_t kAnswerCount = 8;

// ---------------------------------------------------------------------------
// names

inline std::string_view task_name(Task t) {
  switch (t) {
    case Task::Agreement: return "agreement";
    case Task::Caus: return "caus";
    case Task::Od: return "od";
  }
  return "?";
}

inline std::optional<Task> parse_task(std::string_view s) {
  if (s == "agreement" || s == "agr") return Task::Agreement;
  if (s == "caus") return Task::Caus;
  if (s == "od") return Task::Od;
  return std::nullopt;
}

inline std::string_view lex_type_name(LexType t) {
  switch (t) {
    case LexType::TypeI: return "I";
    case LexType::TypeII: return "II";
    case LexType::TypeIII: return "III";
  }
  return "?";
}

inline std::optional<LexType> parse_lex_type(std::string_view s) {
  if (s == "I" || s == "1") return LexType::TypeI;
  if (s == "II" || s == "2") return LexType::TypeII;
  if (s == "III" || s == "3") return LexType::TypeIII;
  return std::nullopt;
}

inline std::string_view role_name(ChunkRole r) {
  switch (r) {
    case ChunkRole::NpSubj: return "NP";
    case ChunkRole::Pp1: return "PP1";
    case ChunkRole::Pp2: return "PP2";
    case ChunkRole::Vp: return "VP";
    case ChunkRole::Ag: return "Ag";
    case ChunkRole::Pat: return "Pat";
    case ChunkRole::AktV: return "Akt";
    case ChunkRole::PassV: return "Pass";
    case ChunkRole::PNp: return "P-NP";
    case ChunkRole::DaNp: return "da-NP";
    case ChunkRole::DaAg: return "da-Ag";
    case ChunkRole::DaPat: return "da-Pat";
  }
  return "?";
}

inline std::optional<ChunkRole> parse_role(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(ChunkRole::DaPat); ++i) {
    const auto r = static_cast<ChunkRole>(i);
    if (role_name(r) == s) return r;
  }
  return std::nullopt;
}

inline std::string_view number_name(Number n) {
  switch (n) {
    case Number::Sg: return "sg";
    case Number::Pl: return "pl";
    case Number::NA: return "na";
  }
  return "?";
}

inline std::optional<Number> parse_number(std::string_view s) {
  if (s == "sg") return Number::Sg;
  if (s == "pl") return Number::Pl;
  if (s == "na") return Number::NA;
  return std::nullopt;
}

inline std::string_view label_name(AnswerLabel l) {
  switch (l) {
    case AnswerLabel::Correct: return "Correct";
    case AnswerLabel::Coord: return "Coord";
    case AnswerLabel::WNA: return "WNA";
    case AnswerLabel::WN1: return "WN1";
    case AnswerLabel::WN2: return "WN2";
    case AnswerLabel::AEV: return "AEV";
    case AnswerLabel::AEN1: return "AEN1";
    case AnswerLabel::AEN2: return "AEN2";
    case AnswerLabel::IInt: return "I-Int";
    case AnswerLabel::ERPass: return "ER-Pass";
    case AnswerLabel::IERPass: return "IER-Pass";
    case AnswerLabel::RTrans: return "R-Trans";
    case AnswerLabel::IRTrans: return "IR-Trans";
    case AnswerLabel::EWrBy: return "E-WrBy";
    case AnswerLabel::IEWrBy: return "IE-WrBy";
  }
  return "?";
}

inline std::optional<AnswerLabel> parse_label(std::string_view s) {
  for (auto l : kAllLabels)
    if (label_name(l) == s) return l;
  return std::nullopt;
}

inline bool is_alternation(Task t) { return t != Task::Agreement; }

// ---------------------------------------------------------------------------
// chunks and sentences

// Structural part of a chunk, without surface text.
struct ChunkSlot {
  ChunkRole role;
  Number number = Number::NA;
  // Coordinated PP2 ("e" + PP2) of the agreement Coord answer.
  bool coordinated = false;

  friend bool operator==(const ChunkSlot&, const ChunkSlot&) = default;
};

using PatternRow = std::vector<ChunkSlot>;

struct Chunk {
  ChunkRole role;
  Number number = Number::NA;
  std::string surface;
  bool coordinated = false;

  ChunkSlot slot() const { return {role, number, coordinated}; }

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

inline std::string slot_tag(const ChunkSlot& s) {
  std::string out;
  if (s.coordinated) out += "e-";
  out += role_name(s.role);
  if (s.number != Number::NA) {
    out += '.';
    out += number_name(s.number);
  }
  return out;
}

// Canonical structural tag, e.g. "NP.sg PP1.pl VP.sg" or
// "Pat Pass da-Ag P-NP". Surface text does not contribute.
inline std::string pattern_tag(const PatternRow& row) {
  if (row.empty()) fail(ErrorCategory::kData, "pattern_tag: empty chunk list");
  std::string out;
  for (const auto& s : row) {
    if (!out.empty()) out += ' ';
    out += slot_tag(s);
  }
  return out;
}

inline PatternRow slots_of(const std::vector<Chunk>& chunks) {
  PatternRow row;
  row.reserve(chunks.size());
  for (const auto& c : chunks) row.push_back(c.slot());
  return row;
}

inline std::string pattern_tag(const std::vector<Chunk>& chunks) {
  return pattern_tag(slots_of(chunks));
}

struct SentenceRecord {
  std::string id;
  std::string text;
  std::vector<Chunk> chunks;
  Task task = Task::Agreement;
  std::string pattern_tag;

  friend bool operator==(const SentenceRecord&,
                         const SentenceRecord&) = default;
};

inline std::string_view task_id_prefix(Task t) {
  switch (t) {
    case Task::Agreement: return "agr";
    case Task::Caus: return "caus";
    case Task::Od: return "od";
  }
  return "x";
}

// Builds a record whose id and tag are pure functions of (task, chunks, text).
inline SentenceRecord make_sentence(Task task, std::vector<Chunk> chunks,
                                    std::string text);

struct Answer {
  SentenceRecord sentence;
  AnswerLabel label;

  friend bool operator==(const Answer&, const Answer&) = default;
};

struct BlmInstance {
  std::array<SentenceRecord, kContextSize> context;
  std::array<Answer, kAnswerCount> answers;
  std::size_t correct_index = 0;
  Task task = Task::Agreement;
  LexType lex_type = LexType::TypeI;
  std::string group_key;

  friend bool operator==(const BlmInstance&, const BlmInstance&) = default;
};

// Throws kData when an instance breaks a structural invariant.
inline void validate(const BlmInstance& inst);

// ---------------------------------------------------------------------------
// templates

struct LabeledPattern {
  PatternRow pattern;
  AnswerLabel label;
};

namespace detail {

inline PatternRow agr_row(Number np, Number pp1, std::optional<Number> pp2,
                          Number vp, bool coord = false) {
  PatternRow row{{ChunkRole::NpSubj, np}, {ChunkRole::Pp1, pp1}};
  if (pp2) row.push_back({ChunkRole::Pp2, *pp2, coord});
  row.push_back({ChunkRole::Vp, vp});
  return row;
}

inline PatternRow alt_row(std::initializer_list<ChunkRole> roles) {
  PatternRow row;
  for (auto r : roles) row.push_back({r, Number::NA});
  return row;
}

inline void require_alternation(Task task, const char* fn) {
  if (!is_alternation(task))
    fail(ErrorCategory::kUsage,
         std::string(fn) + ": agreement has no alternation template");
}

}  // namespace detail

inline std::array<PatternRow, kContextSize> agreement_context_pattern() {
  using detail::agr_row;
  constexpr auto S = Number::Sg;
  constexpr auto P = Number::Pl;
  return {
      agr_row(S, S, std::nullopt, S), agr_row(P, S, std::nullopt, P),
      agr_row(S, P, std::nullopt, S), agr_row(P, P, std::nullopt, P),
      agr_row(S, S, S, S),            agr_row(P, S, S, P),
      agr_row(S, P, S, S),
  };
}

inline std::array<LabeledPattern, kAnswerCount> agreement_answer_patterns() {
  using detail::agr_row;
  constexpr auto S = Number::Sg;
  constexpr auto P = Number::Pl;
  return {{
      {agr_row(P, P, S, P), AnswerLabel::Correct},
      {agr_row(P, P, S, P, /*coord=*/true), AnswerLabel::Coord},
      {agr_row(P, P, std::nullopt, P), AnswerLabel::WNA},
      {agr_row(P, S, S, P), AnswerLabel::WN1},
      {agr_row(P, P, P, P), AnswerLabel::WN2},
      {agr_row(P, P, P, S), AnswerLabel::AEV},
      {agr_row(P, S, P, S), AnswerLabel::AEN1},
      {agr_row(P, P, S, S), AnswerLabel::AEN2},
  }};
}

inline std::array<PatternRow, kContextSize> alternation_context_pattern(
    Task task) {
  detail::require_alternation(task, "alternation_context_pattern");
  using detail::alt_row;
  using R = ChunkRole;
  return {
      alt_row({R::Ag, R::AktV, R::Pat, R::PNp}),
      alt_row({R::Ag, R::AktV, R::Pat, R::DaNp}),
      alt_row({R::Pat, R::PassV, R::DaAg, R::PNp}),
      alt_row({R::Pat, R::PassV, R::DaAg, R::DaNp}),
      alt_row({R::Pat, R::PassV, R::PNp}),
      alt_row({R::Pat, R::PassV, R::DaNp}),
      task == Task::Caus ? alt_row({R::Pat, R::AktV, R::PNp})
                         : alt_row({R::Ag, R::AktV, R::PNp}),
  };
}

inline std::array<LabeledPattern, kAnswerCount> alternation_answer_patterns(
    Task task) {
  detail::require_alternation(task, "alternation_answer_patterns");
  using detail::alt_row;
  using R = ChunkRole;
  using L = AnswerLabel;
  const bool caus = task == Task::Caus;
  // Od swaps the labels pairwise relative to Caus.
  return {{
      {alt_row({R::Pat, R::AktV, R::DaNp}), caus ? L::Correct : L::IInt},
      {alt_row({R::Ag, R::AktV, R::DaNp}), caus ? L::IInt : L::Correct},
      {alt_row({R::Pat, R::PassV, R::DaAg}), caus ? L::ERPass : L::IERPass},
      {alt_row({R::Ag, R::PassV, R::DaPat}), caus ? L::IERPass : L::ERPass},
      {alt_row({R::Pat, R::AktV, R::Ag}), caus ? L::RTrans : L::IRTrans},
      {alt_row({R::Ag, R::AktV, R::Pat}), caus ? L::IRTrans : L::RTrans},
      {alt_row({R::Pat, R::AktV, R::DaAg}), caus ? L::EWrBy : L::IEWrBy},
      {alt_row({R::Ag, R::AktV, R::DaPat}), caus ? L::IEWrBy : L::EWrBy},
  }};
}

inline std::array<PatternRow, kContextSize> context_pattern(Task task) {
  return task == Task::Agreement ? agreement_context_pattern()
                                 : alternation_context_pattern(task);
}

inline std::array<LabeledPattern, kAnswerCount> answer_patterns(Task task) {
  return task == Task::Agreement ? agreement_answer_patterns()
                                 : alternation_answer_patterns(task);
}

// The eight labels of a task in template order.
inline std::array<AnswerLabel, kAnswerCount> task_labels(Task task) {
  std::array<AnswerLabel, kAnswerCount> out{};
  const auto rows = answer_patterns(task);
  for (std::size_t i = 0; i < kAnswerCount; ++i) out[i] = rows[i].label;
  return out;
}

// ---------------------------------------------------------------------------
// out-of-line inline definitions

inline SentenceRecord make_sentence(Task task, std::vector<Chunk> chunks,
                                    std::string text) {
  SentenceRecord rec;
  rec.pattern_tag = pattern_tag(chunks);
  rec.task = task;
  rec.text = std::move(text);
  rec.chunks = std::move(chunks);
  // The id covers the tag as well as the text: two structurally different
  // sentences never share an embedding even if their surfaces coincide.
  rec.id = std::string(task_id_prefix(task)) + "-" +
           hex64(fnv1a64(rec.pattern_tag + "\x1f" + rec.text));
  return rec;
}

inline void validate(const BlmInstance& inst) {
  auto bad = [&](const std::string& why) {
    fail(ErrorCategory::kData, "invalid instance (group '" + inst.group_key +
                                   "'): " + why);
  };
  if (inst.group_key.empty()) bad("empty group_key");
  if (inst.correct_index >= kAnswerCount) bad("correct_index out of range");
  if (inst.answers[inst.correct_index].label != AnswerLabel::Correct)
    bad("answers[correct_index] is not labeled Correct");
  auto expected = task_labels(inst.task);
  std::array<AnswerLabel, kAnswerCount> got{};
  for (std::size_t i = 0; i < kAnswerCount; ++i) got[i] = inst.answers[i].label;
  std::sort(expected.begin(), expected.end());
  std::sort(got.begin(), got.end());
  if (expected != got) bad("answer labels are not the task's label set");
  auto check = [&](const SentenceRecord& s) {
    if (s.id.empty()) bad("sentence with empty id");
    if (s.task != inst.task) bad("sentence task differs from instance task");
    if (s.pattern_tag != pattern_tag(s.chunks))
      bad("pattern_tag does not match chunks for " + s.id);
  };
  for (const auto& s : inst.context) check(s);
  for (const auto& a : inst.answers) check(a.sentence);
}

}  // namespace blm
