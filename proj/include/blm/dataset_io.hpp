#pragma once

// Dataset files: JSON Lines, one BlmInstance per line. Inventory files:
// JSON Lines of {"id", "text"} records consumed by external encoders.

#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "blm/data.hpp"
#include "blm/error.hpp"
#include "blm/generator.hpp"

namespace blm {

namespace detail {

using nlohmann::json;

inline json sentence_to_json(const SentenceRecord& s) {
  json chunks = json::array();
  for (const auto& c : s.chunks) {
    json jc = {{"role", role_name(c.role)},
               {"number", number_name(c.number)},
               {"surface", c.surface}};
    if (c.coordinated) jc["coord"] = true;
    chunks.push_back(std::move(jc));
  }
  return {{"id", s.id}, {"text", s.text}, {"tag", s.pattern_tag},
          {"chunks", std::move(chunks)}};
}

template <class T>
T parsed_or_throw(const std::optional<T>& v, const std::string& what) {
  if (!v) throw std::invalid_argument(what);
  return *v;
}

inline SentenceRecord sentence_from_json(const json& j, Task task) {
  SentenceRecord s;
  s.id = j.at("id").get<std::string>();
  s.text = j.at("text").get<std::string>();
  s.pattern_tag = j.at("tag").get<std::string>();
  s.task = task;
  for (const auto& jc : j.at("chunks")) {
    Chunk c;
    c.role = parsed_or_throw(parse_role(jc.at("role").get<std::string>()),
                             "unknown chunk role");
    c.number = parsed_or_throw(parse_number(jc.at("number").get<std::string>()),
                               "unknown grammatical number");
    c.surface = jc.at("surface").get<std::string>();
    c.coordinated = jc.value("coord", false);
    s.chunks.push_back(std::move(c));
  }
  return s;
}

}  // namespace detail

inline std::string instance_to_line(const BlmInstance& inst) {
  using detail::json;
  json context = json::array();
  for (const auto& s : inst.context) context.push_back(detail::sentence_to_json(s));
  json answers = json::array();
  for (const auto& a : inst.answers) {
    json ja = detail::sentence_to_json(a.sentence);
    ja["label"] = label_name(a.label);
    answers.push_back(std::move(ja));
  }
  json j = {{"task", task_name(inst.task)},
            {"lex_type", lex_type_name(inst.lex_type)},
            {"group_key", inst.group_key},
            {"correct_index", inst.correct_index},
            {"context", std::move(context)},
            {"answers", std::move(answers)}};
  return j.dump();
}

// Throws std::exception subclasses on malformed input; callers add the
// line number.
inline BlmInstance instance_from_line(const std::string& line) {
  using detail::json;
  using detail::parsed_or_throw;
  const json j = json::parse(line);
  BlmInstance inst;
  inst.task = parsed_or_throw(parse_task(j.at("task").get<std::string>()),
                              "unknown task");
  inst.lex_type = parsed_or_throw(
      parse_lex_type(j.at("lex_type").get<std::string>()), "unknown lex_type");
  inst.group_key = j.at("group_key").get<std::string>();
  inst.correct_index = j.at("correct_index").get<std::size_t>();
  const auto& ctx = j.at("context");
  const auto& ans = j.at("answers");
  if (ctx.size() != kContextSize) throw std::invalid_argument("context must have 7 sentences");
  if (ans.size() != kAnswerCount) throw std::invalid_argument("answers must have 8 candidates");
  for (std::size_t i = 0; i < kContextSize; ++i)
    inst.context[i] = detail::sentence_from_json(ctx[i], inst.task);
  for (std::size_t i = 0; i < kAnswerCount; ++i) {
    inst.answers[i].sentence = detail::sentence_from_json(ans[i], inst.task);
    inst.answers[i].label = parsed_or_throw(
        parse_label(ans[i].at("label").get<std::string>()), "unknown label");
  }
  validate(inst);
  return inst;
}

inline void save_dataset(const std::vector<BlmInstance>& instances,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::kIo, "cannot write dataset: " + path);
  for (const auto& inst : instances) out << instance_to_line(inst) << '\n';
  if (!out) fail(ErrorCategory::kIo, "write failed: " + path);
}

inline std::vector<BlmInstance> parse_dataset(std::istream& in,
                                              const std::string& source) {
  std::vector<BlmInstance> out;
  std::unordered_map<std::string, std::string> texts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    try {
      out.push_back(instance_from_line(line));
    } catch (const Error& e) {
      fail(ErrorCategory::kFormat, where + e.what());
    } catch (const std::exception& e) {
      fail(ErrorCategory::kFormat, where + "malformed record: " + e.what());
    }
    auto check_id = [&](const SentenceRecord& s) {
      auto [it, inserted] = texts.emplace(s.id, s.text);
      if (!inserted && it->second != s.text)
        fail(ErrorCategory::kFormat, where + "id " + s.id + " reused with different text");
    };
    for (const auto& s : out.back().context) check_id(s);
    for (const auto& a : out.back().answers) check_id(a.sentence);
  }
  return out;
}

inline std::vector<BlmInstance> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::kNotFound, "dataset not found: " + path);
  return parse_dataset(in, path);
}

inline void save_inventory(const std::vector<SentenceRecord>& records,
                           const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::kIo, "cannot write inventory: " + path);
  for (const auto& r : records)
    out << nlohmann::json{{"id", r.id}, {"text", r.text}}.dump() << '\n';
  if (!out) fail(ErrorCategory::kIo, "write failed: " + path);
}

}  // namespace blm
