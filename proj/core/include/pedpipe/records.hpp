// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

// Dataset records and their JSON Lines encodings.
//
//   instruction: {"id", "task", "turns": [{"role": "user"|"assistant", "text"}]}
//   preference:  {"id", "instruction", "chosen", "rejected"}
//   plain text:  {"text"} (optional "source")
//   evaluation:  {"id", "prompt", "reference", "candidate"}

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pedpipe {

enum class TaskTag { medkqa, evidiag, trerecom, general, safety, self_cognition };
const char* to_string(TaskTag tag);
/// Accepts the display names (e.g. "MedKQ&A") and lower-case identifiers.
TaskTag task_tag_from_string(const std::string& name);

enum class Role { user, assistant };
const char* to_string(Role role);

struct Turn {
  Role role = Role::user;
  std::string text;
  bool operator==(const Turn&) const = default;
};

struct InstructionRecord {
  std::string id;
  TaskTag task = TaskTag::general;
  std::vector<Turn> turns;

  /// Starts with a user turn, alternates, contains an assistant turn.
  void validate() const;
  bool operator==(const InstructionRecord&) const = default;
};

enum class DocSource { plain, converted_instruction, expanded };
const char* to_string(DocSource source);
DocSource doc_source_from_string(const std::string& name);

struct CompletionDoc {
  std::string text;
  DocSource source = DocSource::plain;
  bool operator==(const CompletionDoc&) const = default;
};

struct PreferenceText {
  std::string id;
  std::string instruction;
  std::string chosen;
  std::string rejected;
  bool operator==(const PreferenceText&) const = default;
};

struct EvalSample {
  std::string id;
  std::string prompt;
  std::string reference;
  std::string candidate;
};

enum class ParseMode { strict, lenient };

struct ParseIssue {
  std::size_t line = 0;  // 1-based
  std::string message;
};

template <typename T>
struct LoadResult {
  std::vector<T> records;
  std::vector<ParseIssue> issues;  // lines skipped in lenient mode
};

// Strict mode throws DataError("<source>:<line>: ...") on the first bad line.
LoadResult<InstructionRecord> read_instruction_records(std::istream& in, ParseMode mode, const std::string& source = "");
LoadResult<PreferenceText> read_preference_texts(std::istream& in, ParseMode mode, const std::string& source = "");
LoadResult<CompletionDoc> read_plain_corpus(std::istream& in, ParseMode mode, const std::string& source = "");
LoadResult<EvalSample> read_eval_samples(std::istream& in, ParseMode mode, const std::string& source = "");

LoadResult<InstructionRecord> load_instruction_records(const std::filesystem::path& path, ParseMode mode);
LoadResult<PreferenceText> load_preference_texts(const std::filesystem::path& path, ParseMode mode);
LoadResult<CompletionDoc> load_plain_corpus(const std::filesystem::path& path, ParseMode mode);
LoadResult<EvalSample> load_eval_samples(const std::filesystem::path& path, ParseMode mode);

std::string to_json_line(const InstructionRecord& record);
std::string to_json_line(const PreferenceText& record);
std::string to_json_line(const CompletionDoc& doc);
std::string to_json_line(const EvalSample& sample);

template <typename T>
void write_json_lines(std::ostream& out, const std::vector<T>& records);
template <typename T>
void save_json_lines(const std::filesystem::path& path, const std::vector<T>& records);

}  // namespace pedpipe
