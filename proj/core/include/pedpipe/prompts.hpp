// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pedpipe {

/// Text body with `{{name}}` placeholders.
struct PromptTemplate {
  std::string id;
  std::string body;

  /// Distinct placeholder names in order of first appearance.
  std::vector<std::string> placeholders() const;
  /// Substitutes in a single pass (values are not rescanned). ArgumentError
  /// names the first placeholder without a value.
  std::string render(const std::map<std::string, std::string>& values) const;
};

class PromptLibrary {
 public:
  static const std::vector<std::string>& required_ids();

  /// Reads `<id>.txt` for every required id.
  static PromptLibrary load(const std::filesystem::path& dir);
  /// PEDPIPE_PROMPT_DIR if set, else the installed asset directory, else the
  /// source tree copy.
  static std::filesystem::path default_dir();

  void add(PromptTemplate tmpl);
  const PromptTemplate& get(const std::string& id) const;
  bool contains(const std::string& id) const { return templates_.count(id) > 0; }

 private:
  std::map<std::string, PromptTemplate> templates_;
};

}  // namespace pedpipe
