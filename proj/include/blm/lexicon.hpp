#pragma once

// Lexicon: the word material the generator realizes templates with.
//
// File format (UTF-8, line oriented). A line "[section]" opens a section;
// entries are '|'-separated fields; '#' starts a comment line. Sections:
//
//   [nouns]         sg | pl                          agreement subjects
//   [pp_modifiers]  PP1|PP2 | sg | pl                attractor PPs
//   [agr_verbs]     sg | pl                          full VP forms
//   [alt_verbs]     caus|od | lemma | active | passive | intransitive
//   [agents]        np | da-form
//   [patients]      np | da-form
//   [p_nps]         text                             PP with any preposition
//   [da_nps]        text                             non-agentive da-PP
//
// See docs/formats.md for a worked example.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "blm/data.hpp"
#include "blm/error.hpp"

namespace blm {

struct NumberedForm {
  std::string sg;
  std::string pl;

  const std::string& form(Number n) const { return n == Number::Pl ? pl : sg; }
};

struct AltVerb {
  std::string lemma;
  Task verb_class = Task::Caus;
  std::string active_form;
  std::string passive_form;
  std::string intransitive_form;
};

struct Argument {
  std::string np;
  std::string da_form;
};

struct Lexicon {
  std::vector<NumberedForm> nouns;
  std::vector<NumberedForm> pp1;
  std::vector<NumberedForm> pp2;
  std::vector<NumberedForm> agr_verbs;
  std::vector<AltVerb> alt_verbs;
  std::vector<Argument> agents;
  std::vector<Argument> patients;
  std::vector<std::string> p_nps;
  std::vector<std::string> da_nps;

  // Indices into alt_verbs of the verbs belonging to an alternation class.
  std::vector<std::size_t> verbs_of(Task cls) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < alt_verbs.size(); ++i)
      if (alt_verbs[i].verb_class == cls) out.push_back(i);
    return out;
  }
};

// Throws kData naming the first empty slot the task needs.
inline void check_adequate(const Lexicon& lex, Task task) {
  auto need = [&](bool ok, std::string_view slot) {
    if (!ok)
      fail(ErrorCategory::kData,
           "lexicon inadequate for " + std::string(task_name(task)) +
               ": missing " + std::string(slot));
  };
  if (task == Task::Agreement) {
    need(!lex.nouns.empty(), "nouns");
    need(!lex.pp1.empty(), "pp_modifiers (PP1)");
    need(!lex.pp2.empty(), "pp_modifiers (PP2)");
    need(!lex.agr_verbs.empty(), "agr_verbs");
    return;
  }
  need(!lex.verbs_of(task).empty(),
       task == Task::Caus ? "alt_verbs (caus)" : "alt_verbs (od)");
  need(!lex.agents.empty(), "agents");
  need(!lex.patients.empty(), "patients");
  need(!lex.p_nps.empty(), "p_nps");
  need(!lex.da_nps.empty(), "da_nps");
}

namespace detail {

inline std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto bar = line.find('|', start);
    out.push_back(trim(line.substr(start, bar - start)));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return out;
}

}  // namespace detail

inline Lexicon parse_lexicon(std::istream& in, const std::string& source) {
  Lexicon lex;
  std::string section;
  std::string raw;
  std::size_t line_no = 0;
  auto bad = [&](const std::string& why) {
    fail(ErrorCategory::kFormat,
         source + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') bad("unterminated section header");
      section = line.substr(1, line.size() - 2);
      static const std::vector<std::string> kKnown{
          "nouns",  "pp_modifiers", "agr_verbs", "alt_verbs",
          "agents", "patients",     "p_nps",     "da_nps"};
      if (std::find(kKnown.begin(), kKnown.end(), section) == kKnown.end())
        bad("unknown section [" + section + "]");
      continue;
    }
    if (section.empty()) bad("entry outside of any section");
    const auto f = detail::split_fields(line);
    auto arity = [&](std::size_t n) {
      if (f.size() != n)
        bad("section [" + section + "] expects " + std::to_string(n) +
            " fields, got " + std::to_string(f.size()));
      for (const auto& field : f)
        if (field.empty()) bad("empty field");
    };
    if (section == "nouns") {
      arity(2);
      lex.nouns.push_back({f[0], f[1]});
    } else if (section == "pp_modifiers") {
      arity(3);
      if (f[0] == "PP1") {
        lex.pp1.push_back({f[1], f[2]});
      } else if (f[0] == "PP2") {
        lex.pp2.push_back({f[1], f[2]});
      } else {
        bad("pp_modifiers slot must be PP1 or PP2, got '" + f[0] + "'");
      }
    } else if (section == "agr_verbs") {
      arity(2);
      lex.agr_verbs.push_back({f[0], f[1]});
    } else if (section == "alt_verbs") {
      arity(5);
      const auto cls = parse_task(f[0]);
      if (!cls || *cls == Task::Agreement)
        bad("alt_verbs class must be caus or od, got '" + f[0] + "'");
      lex.alt_verbs.push_back({f[1], *cls, f[2], f[3], f[4]});
    } else if (section == "agents" || section == "patients") {
      arity(2);
      (section == "agents" ? lex.agents : lex.patients).push_back({f[0], f[1]});
    } else {
      arity(1);
      (section == "p_nps" ? lex.p_nps : lex.da_nps).push_back(f[0]);
    }
  }
  return lex;
}

inline Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::kNotFound, "lexicon not found: " + path);
  return parse_lexicon(in, path);
}

inline Lexicon parse_lexicon(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_lexicon(in, "<string>");
}

}  // namespace blm
