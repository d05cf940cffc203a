#pragma once

// Template expansion into concrete BLM instances, lexicalisation types,
// group-disjoint train/dev/test splitting, and the sentence inventory.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "blm/data.hpp"
#include "blm/error.hpp"
#include "blm/lexicon.hpp"
#include "blm/random.hpp"

namespace blm {

inline constexpr std::size_t kRowsPerInstance = kContextSize + kAnswerCount;

// Lexical choice for one sentence row. Indices point into the lexicon
// lists; fields a task does not use stay 0. `verb` indexes agr_verbs for
// agreement and alt_verbs for the alternations.
struct RowDraw {
  std::size_t noun = 0;
  std::size_t pp1 = 0;
  std::size_t pp2 = 0;
  std::size_t verb = 0;
  std::size_t agent = 0;
  std::size_t patient = 0;
  std::size_t p_np = 0;
  std::size_t da_np = 0;

  friend bool operator==(const RowDraw&, const RowDraw&) = default;
};

// Rows 0..6 realize the context, rows 7..14 the answer template rows in
// template order. answer_order[i] is the template row shown at position i.
struct LexicalDraw {
  std::array<RowDraw, kRowsPerInstance> rows{};
  std::array<std::size_t, kAnswerCount> answer_order{0, 1, 2, 3, 4, 5, 6, 7};
};

namespace detail {

inline std::string capitalize(std::string s) {
  if (!s.empty() && static_cast<unsigned char>(s[0]) < 0x80)
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

inline std::string join_surfaces(const std::vector<Chunk>& chunks) {
  std::string out;
  for (const auto& c : chunks) {
    if (!out.empty()) out += ' ';
    out += c.surface;
  }
  return out;
}

inline SentenceRecord realize_agreement(const PatternRow& row,
                                        const RowDraw& d, const Lexicon& lex) {
  std::vector<Chunk> chunks;
  for (const auto& s : row) {
    Chunk c{s.role, s.number, {}, s.coordinated};
    switch (s.role) {
      case ChunkRole::NpSubj: c.surface = lex.nouns.at(d.noun).form(s.number); break;
      case ChunkRole::Pp1: c.surface = lex.pp1.at(d.pp1).form(s.number); break;
      case ChunkRole::Pp2:
        c.surface = lex.pp2.at(d.pp2).form(s.number);
        if (s.coordinated) c.surface = "e " + c.surface;
        break;
      case ChunkRole::Vp: c.surface = lex.agr_verbs.at(d.verb).form(s.number); break;
      default:
        fail(ErrorCategory::kData, "agreement template has non-agreement chunk");
    }
    chunks.push_back(std::move(c));
  }
  std::string text = capitalize(join_surfaces(chunks)) + ".";
  return make_sentence(Task::Agreement, std::move(chunks), std::move(text));
}

inline SentenceRecord realize_alternation(Task task, const PatternRow& row,
                                          const RowDraw& d, const Lexicon& lex) {
  const AltVerb& verb = lex.alt_verbs.at(d.verb);
  std::vector<Chunk> chunks;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const auto& s = row[i];
    Chunk c{s.role, Number::NA, {}, false};
    switch (s.role) {
      case ChunkRole::Ag: c.surface = lex.agents.at(d.agent).np; break;
      case ChunkRole::Pat: c.surface = lex.patients.at(d.patient).np; break;
      case ChunkRole::AktV: {
        // Transitive when a bare object follows, intransitive otherwise.
        const bool has_object =
            i + 1 < row.size() && (row[i + 1].role == ChunkRole::Ag ||
                                   row[i + 1].role == ChunkRole::Pat);
        c.surface = has_object ? verb.active_form : verb.intransitive_form;
        break;
      }
      case ChunkRole::PassV: c.surface = verb.passive_form; break;
      case ChunkRole::PNp: c.surface = lex.p_nps.at(d.p_np); break;
      case ChunkRole::DaNp: c.surface = lex.da_nps.at(d.da_np); break;
      case ChunkRole::DaAg: c.surface = lex.agents.at(d.agent).da_form; break;
      case ChunkRole::DaPat: c.surface = lex.patients.at(d.patient).da_form; break;
      default:
        fail(ErrorCategory::kData, "alternation template has agreement chunk");
    }
    chunks.push_back(std::move(c));
  }
  std::string text = capitalize(join_surfaces(chunks));
  return make_sentence(task, std::move(chunks), std::move(text));
}

// Replaces the last context row's value when all seven rows happen to agree,
// so that a varying slot visibly varies whenever the lexicon allows it.
template <class Field>
void force_variation(std::array<RowDraw, kRowsPerInstance>& rows, Field field,
                     const std::vector<std::size_t>& choices, Rng& rng) {
  if (choices.size() < 2) return;
  const std::size_t first = rows[0].*field;
  for (std::size_t r = 1; r < kContextSize; ++r)
    if (rows[r].*field != first) return;
  std::vector<std::size_t> others;
  for (auto c : choices)
    if (c != first) others.push_back(c);
  rows[kContextSize - 1].*field = others[uniform_index(rng, others.size())];
}

inline std::vector<std::size_t> iota_vec(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace detail

// Samples lexical choices for one instance according to the
// lexicalisation type: TypeI keeps one choice per slot for all rows,
// TypeII keeps only the verb fixed, TypeIII lets every slot vary per row.
inline LexicalDraw draw_lexical(Task task, LexType lex_type, const Lexicon& lex,
                                Rng& rng) {
  check_adequate(lex, task);
  using Field = std::size_t RowDraw::*;
  struct SlotChoices {
    Field field;
    std::vector<std::size_t> choices;
    bool is_verb;
  };
  std::vector<SlotChoices> slots;
  if (task == Task::Agreement) {
    slots = {{&RowDraw::noun, detail::iota_vec(lex.nouns.size()), false},
             {&RowDraw::pp1, detail::iota_vec(lex.pp1.size()), false},
             {&RowDraw::pp2, detail::iota_vec(lex.pp2.size()), false},
             {&RowDraw::verb, detail::iota_vec(lex.agr_verbs.size()), true}};
  } else {
    slots = {{&RowDraw::verb, lex.verbs_of(task), true},
             {&RowDraw::agent, detail::iota_vec(lex.agents.size()), false},
             {&RowDraw::patient, detail::iota_vec(lex.patients.size()), false},
             {&RowDraw::p_np, detail::iota_vec(lex.p_nps.size()), false},
             {&RowDraw::da_np, detail::iota_vec(lex.da_nps.size()), false}};
  }

  LexicalDraw draw;
  for (const auto& slot : slots) {
    const bool varies = lex_type == LexType::TypeIII ||
                        (lex_type == LexType::TypeII && !slot.is_verb);
    if (!varies) {
      const auto pick = slot.choices[uniform_index(rng, slot.choices.size())];
      for (auto& row : draw.rows) row.*slot.field = pick;
      continue;
    }
    for (auto& row : draw.rows)
      row.*slot.field = slot.choices[uniform_index(rng, slot.choices.size())];
    detail::force_variation(draw.rows, slot.field, slot.choices, rng);
  }
  std::vector<std::size_t> order = detail::iota_vec(kAnswerCount);
  shuffle_in_place(order, rng);
  std::copy(order.begin(), order.end(), draw.answer_order.begin());
  return draw;
}

// Realizes one instance from explicit lexical choices. Building the same
// draw for Caus and for Od yields a minimally differing pair.
inline BlmInstance build_instance(Task task, LexType lex_type,
                                  const Lexicon& lex, const LexicalDraw& draw) {
  const auto ctx = context_pattern(task);
  const auto ans = answer_patterns(task);
  auto realize = [&](const PatternRow& row, const RowDraw& d) {
    return task == Task::Agreement
               ? detail::realize_agreement(row, d, lex)
               : detail::realize_alternation(task, row, d, lex);
  };

  BlmInstance inst;
  inst.task = task;
  inst.lex_type = lex_type;
  for (std::size_t r = 0; r < kContextSize; ++r)
    inst.context[r] = realize(ctx[r], draw.rows[r]);

  std::array<bool, kAnswerCount> seen{};
  for (std::size_t pos = 0; pos < kAnswerCount; ++pos) {
    const std::size_t t = draw.answer_order[pos];
    if (t >= kAnswerCount || seen[t])
      fail(ErrorCategory::kData, "answer_order is not a permutation");
    seen[t] = true;
    inst.answers[pos] = {realize(ans[t].pattern, draw.rows[kContextSize + t]),
                         ans[t].label};
    if (ans[t].label == AnswerLabel::Correct) {
      inst.correct_index = pos;
      inst.group_key =
          task == Task::Agreement
              ? inst.answers[pos].sentence.text
              : lex.alt_verbs.at(draw.rows[kContextSize + t].verb).lemma;
    }
  }
  validate(inst);
  return inst;
}

// Deterministic in (task, lex_type, lexicon, count, seed); each instance
// uses its own derived stream so instances can be produced independently.
inline std::vector<BlmInstance> generate(Task task, LexType lex_type,
                                         const Lexicon& lex, std::size_t count,
                                         std::uint64_t seed) {
  if (count < 1) fail(ErrorCategory::kUsage, "generate: count must be >= 1");
  check_adequate(lex, task);
  std::vector<BlmInstance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix_seed({seed, static_cast<std::uint64_t>(task),
                      static_cast<std::uint64_t>(lex_type), i}));
    out.push_back(build_instance(task, lex_type, lex,
                                 draw_lexical(task, lex_type, lex, rng)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// splitting

enum class GroupField { CorrectAnswer, VerbLemma };

inline GroupField default_group_field(Task task) {
  return task == Task::Agreement ? GroupField::CorrectAnswer
                                 : GroupField::VerbLemma;
}

struct SplitSpec {
  // Proportional weights, normalized before use.
  std::array<double, 3> ratios{90.0, 20.0, 10.0};
  GroupField group_field = GroupField::CorrectAnswer;
};

struct SplitResult {
  std::vector<BlmInstance> train;
  std::vector<BlmInstance> dev;
  std::vector<BlmInstance> test;
};

inline std::string split_key(const BlmInstance& inst, GroupField field) {
  if (field == GroupField::CorrectAnswer)
    return inst.answers.at(inst.correct_index).sentence.text;
  if (!is_alternation(inst.task))
    fail(ErrorCategory::kData, "verb-lemma grouping requires alternation data");
  return inst.group_key;
}

// Apportionment of whole groups to parts. Every part with positive weight
// gets one group first; each remaining group then goes to the part whose
// quota exceeds its allocation the most (ties to the lower index). Without
// the one-group floor this is largest-remainder apportionment, and with it
// the allocation still minimizes the L1 distance to the quotas.
inline std::array<std::size_t, 3> apportion(std::size_t n_groups,
                                            const std::array<double, 3>& w) {
  double total = 0.0;
  std::size_t positive = 0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x))
      fail(ErrorCategory::kUsage, "split ratios must be finite and >= 0");
    total += x;
    positive += x > 0.0 ? 1 : 0;
  }
  if (total <= 0.0) fail(ErrorCategory::kUsage, "split ratios sum to zero");
  if (n_groups < positive)
    fail(ErrorCategory::kData, "cannot split " + std::to_string(n_groups) +
                                   " group(s) into " + std::to_string(positive) +
                                   " disjoint parts");

  std::array<double, 3> quota{};
  std::array<std::size_t, 3> alloc{};
  for (int i = 0; i < 3; ++i) {
    quota[i] = static_cast<double>(n_groups) * w[i] / total;
    alloc[i] = w[i] > 0.0 ? 1 : 0;
  }
  for (std::size_t assigned = positive; assigned < n_groups; ++assigned) {
    int best = -1;
    for (int i = 0; i < 3; ++i) {
      if (w[i] <= 0.0) continue;
      if (best < 0 || quota[i] - static_cast<double>(alloc[i]) >
                          quota[best] - static_cast<double>(alloc[best]))
        best = i;
    }
    ++alloc[best];
  }
  return alloc;
}

inline SplitResult split(const std::vector<BlmInstance>& instances,
                         const SplitSpec& spec, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (instances[i].group_key.empty())
      fail(ErrorCategory::kData, "split: instance " + std::to_string(i) +
                                     " has an empty group_key");
    groups[split_key(instances[i], spec.group_field)].push_back(i);
  }
  std::vector<const std::vector<std::size_t>*> order;
  order.reserve(groups.size());
  for (const auto& [key, members] : groups) order.push_back(&members);
  Rng rng(mix_seed({seed, 0x5911u}));
  shuffle_in_place(order, rng);

  const auto sizes = apportion(order.size(), spec.ratios);
  SplitResult out;
  std::array<std::vector<BlmInstance>*, 3> parts{&out.train, &out.dev,
                                                 &out.test};
  std::size_t g = 0;
  for (int p = 0; p < 3; ++p) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < sizes[p]; ++k, ++g)
      idx.insert(idx.end(), order[g]->begin(), order[g]->end());
    std::sort(idx.begin(), idx.end());
    for (auto i : idx) parts[p]->push_back(instances[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// inventory

// Every context and answer sentence once, in first-appearance order.
inline std::vector<SentenceRecord> sentence_inventory(
    const std::vector<BlmInstance>& instances) {
  std::vector<SentenceRecord> out;
  std::unordered_map<std::string, std::size_t> index;
  auto add = [&](const SentenceRecord& s) {
    auto [it, inserted] = index.emplace(s.id, out.size());
    if (inserted) {
      out.push_back(s);
    } else if (out[it->second].text != s.text) {
      fail(ErrorCategory::kData, "sentence id collision: " + s.id + " maps to '" +
                                     out[it->second].text + "' and '" + s.text +
                                     "'");
    }
  };
  for (const auto& inst : instances) {
    for (const auto& s : inst.context) add(s);
    for (const auto& a : inst.answers) add(a.sentence);
  }
  return out;
}

}  // namespace blm
