// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedpipe/records.hpp"

#include <fstream>
#include <functional>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "pedpipe/errors.hpp"

namespace pedpipe {

using nlohmann::json;

const char* to_string(TaskTag tag) {
  switch (tag) {
    case TaskTag::medkqa: return "MedKQ&A";
    case TaskTag::evidiag: return "EviDiag";
    case TaskTag::trerecom: return "TreRecom";
    case TaskTag::general: return "General";
    case TaskTag::safety: return "Safety";
    case TaskTag::self_cognition: return "SelfCognition";
  }
  return "?";
}

TaskTag task_tag_from_string(const std::string& name) {
  static const std::pair<const char*, TaskTag> kNames[] = {
      {"MedKQ&A", TaskTag::medkqa},   {"medkqa", TaskTag::medkqa},     {"EviDiag", TaskTag::evidiag},
      {"evidiag", TaskTag::evidiag},  {"TreRecom", TaskTag::trerecom}, {"trerecom", TaskTag::trerecom},
      {"General", TaskTag::general},  {"general", TaskTag::general},   {"Safety", TaskTag::safety},
      {"safety", TaskTag::safety},    {"SelfCognition", TaskTag::self_cognition},
      {"self_cognition", TaskTag::self_cognition}};
  for (const auto& [n, tag] : kNames)
    if (name == n) return tag;
  throw DataError("unknown task tag '" + name + "'");
}

const char* to_string(Role role) { return role == Role::user ? "user" : "assistant"; }

void InstructionRecord::validate() const {
  const std::string who = "instruction record '" + id + "': ";
  if (turns.size() < 2) throw DataError(who + "needs a user turn followed by an assistant turn");
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const Role want = i % 2 == 0 ? Role::user : Role::assistant;
    if (turns[i].role != want) {
      throw DataError(who + "turn " + std::to_string(i) + " should be " + to_string(want) + " (roles alternate)");
    }
  }
}

const char* to_string(DocSource source) {
  switch (source) {
    case DocSource::plain: return "plain";
    case DocSource::converted_instruction: return "converted-instruction";
    case DocSource::expanded: return "expanded";
  }
  return "?";
}

DocSource doc_source_from_string(const std::string& name) {
  if (name == "plain") return DocSource::plain;
  if (name == "converted-instruction") return DocSource::converted_instruction;
  if (name == "expanded") return DocSource::expanded;
  throw DataError("unknown document source '" + name + "'");
}

namespace {

std::string require_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(std::string("missing key \"") + key + "\"");
  if (!it->is_string()) throw DataError(std::string("key \"") + key + "\" is not a string");
  return it->get<std::string>();
}

InstructionRecord parse_instruction(const json& j) {
  InstructionRecord r;
  r.id = require_string(j, "id");
  r.task = task_tag_from_string(require_string(j, "task"));
  auto turns = j.find("turns");
  if (turns == j.end() || !turns->is_array()) throw DataError("missing array \"turns\"");
  for (const auto& t : *turns) {
    if (!t.is_object()) throw DataError("turn is not an object");
    const std::string role = require_string(t, "role");
    Turn turn;
    if (role == "user") {
      turn.role = Role::user;
    } else if (role == "assistant") {
      turn.role = Role::assistant;
    } else {
      throw DataError("unknown role '" + role + "'");
    }
    turn.text = require_string(t, "text");
    r.turns.push_back(std::move(turn));
  }
  r.validate();
  return r;
}

PreferenceText parse_preference(const json& j) {
  PreferenceText r{require_string(j, "id"), require_string(j, "instruction"), require_string(j, "chosen"),
                   require_string(j, "rejected")};
  if (r.instruction.empty() || r.chosen.empty() || r.rejected.empty()) {
    throw DataError("preference record '" + r.id + "' has an empty field");
  }
  if (r.chosen == r.rejected) throw DataError("preference record '" + r.id + "' has identical responses");
  return r;
}

CompletionDoc parse_plain(const json& j) {
  CompletionDoc d;
  d.text = require_string(j, "text");
  if (d.text.empty()) throw DataError("empty \"text\"");
  if (j.contains("source")) d.source = doc_source_from_string(require_string(j, "source"));
  return d;
}

EvalSample parse_eval(const json& j) {
  return EvalSample{require_string(j, "id"), j.contains("prompt") ? require_string(j, "prompt") : std::string(),
                    require_string(j, "reference"), require_string(j, "candidate")};
}

template <typename T>
LoadResult<T> read_lines(std::istream& in, ParseMode mode, const std::string& source,
                         const std::function<T(const json&)>& parse) {
  LoadResult<T> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (!j.is_object()) throw DataError("line is not a JSON object");
      out.records.push_back(parse(j));
    } catch (const std::exception& e) {
      const std::string msg = e.what();
      if (mode == ParseMode::strict) {
        throw DataError((source.empty() ? std::string("line ") : source + ":") + std::to_string(number) + ": " + msg);
      }
      out.issues.push_back({number, msg});
    }
  }
  return out;
}

template <typename T>
LoadResult<T> load_file(const std::filesystem::path& path, ParseMode mode,
                        LoadResult<T> (*reader)(std::istream&, ParseMode, const std::string&)) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return reader(in, mode, path.string());
}

}  // namespace

LoadResult<InstructionRecord> read_instruction_records(std::istream& in, ParseMode mode, const std::string& source) {
  return read_lines<InstructionRecord>(in, mode, source, parse_instruction);
}
LoadResult<PreferenceText> read_preference_texts(std::istream& in, ParseMode mode, const std::string& source) {
  return read_lines<PreferenceText>(in, mode, source, parse_preference);
}
LoadResult<CompletionDoc> read_plain_corpus(std::istream& in, ParseMode mode, const std::string& source) {
  return read_lines<CompletionDoc>(in, mode, source, parse_plain);
}
LoadResult<EvalSample> read_eval_samples(std::istream& in, ParseMode mode, const std::string& source) {
  return read_lines<EvalSample>(in, mode, source, parse_eval);
}

LoadResult<InstructionRecord> load_instruction_records(const std::filesystem::path& path, ParseMode mode) {
  return load_file<InstructionRecord>(path, mode, read_instruction_records);
}
LoadResult<PreferenceText> load_preference_texts(const std::filesystem::path& path, ParseMode mode) {
  return load_file<PreferenceText>(path, mode, read_preference_texts);
}
LoadResult<CompletionDoc> load_plain_corpus(const std::filesystem::path& path, ParseMode mode) {
  return load_file<CompletionDoc>(path, mode, read_plain_corpus);
}
LoadResult<EvalSample> load_eval_samples(const std::filesystem::path& path, ParseMode mode) {
  return load_file<EvalSample>(path, mode, read_eval_samples);
}

std::string to_json_line(const InstructionRecord& record) {
  json turns = json::array();
  for (const auto& t : record.turns) turns.push_back({{"role", to_string(t.role)}, {"text", t.text}});
  return json{{"id", record.id}, {"task", to_string(record.task)}, {"turns", turns}}.dump();
}

std::string to_json_line(const PreferenceText& r) {
  return json{{"id", r.id}, {"instruction", r.instruction}, {"chosen", r.chosen}, {"rejected", r.rejected}}.dump();
}

std::string to_json_line(const CompletionDoc& doc) {
  return json{{"text", doc.text}, {"source", to_string(doc.source)}}.dump();
}

std::string to_json_line(const EvalSample& s) {
  return json{{"id", s.id}, {"prompt", s.prompt}, {"reference", s.reference}, {"candidate", s.candidate}}.dump();
}

template <typename T>
void write_json_lines(std::ostream& out, const std::vector<T>& records) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

template <typename T>
void save_json_lines(const std::filesystem::path& path, const std::vector<T>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_json_lines(out, records);
}

template void write_json_lines(std::ostream&, const std::vector<InstructionRecord>&);
template void write_json_lines(std::ostream&, const std::vector<PreferenceText>&);
template void write_json_lines(std::ostream&, const std::vector<CompletionDoc>&);
template void write_json_lines(std::ostream&, const std::vector<EvalSample>&);
template void save_json_lines(const std::filesystem::path&, const std::vector<InstructionRecord>&);
template void save_json_lines(const std::filesystem::path&, const std::vector<PreferenceText>&);
template void save_json_lines(const std::filesystem::path&, const std::vector<CompletionDoc>&);
template void save_json_lines(const std::filesystem::path&, const std::vector<EvalSample>&);

}  // namespace pedpipe
