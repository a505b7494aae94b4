// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedpipe/prompts.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pedpipe/errors.hpp"

namespace pedpipe {

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> out;
  for (std::size_t pos = body.find("{{"); pos != std::string::npos; pos = body.find("{{", pos + 2)) {
    const auto end = body.find("}}", pos + 2);
    if (end == std::string::npos) break;
    std::string name = body.substr(pos + 2, end - pos - 2);
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
  }
  return out;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  std::string out;
  std::size_t cursor = 0;
  for (std::size_t pos = body.find("{{"); pos != std::string::npos; pos = body.find("{{", cursor)) {
    const auto end = body.find("}}", pos + 2);
    if (end == std::string::npos) break;
    const std::string name = body.substr(pos + 2, end - pos - 2);
    auto it = values.find(name);
    if (it == values.end()) throw ArgumentError("prompt '" + id + "': placeholder {{" + name + "}} is not filled");
    out.append(body, cursor, pos - cursor);
    out += it->second;
    cursor = end + 2;
  }
  out.append(body, cursor, std::string::npos);
  return out;
}

const std::vector<std::string>& PromptLibrary::required_ids() {
  static const std::vector<std::string> kIds = {"inquirer",          "expert_pediatrician", "regularizer",
                                                "reconstruct_task1", "reconstruct_task2",   "knowledge_expand",
                                                "judge"};
  return kIds;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  PromptLibrary lib;
  for (const auto& id : required_ids()) {
    const auto path = dir / (id + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing prompt template " + path.string());
    std::ostringstream body;
    body << in.rdbuf();
    lib.add({id, body.str()});
  }
  return lib;
}

std::filesystem::path PromptLibrary::default_dir() {
  if (const char* env = std::getenv("PEDPIPE_PROMPT_DIR"); env && *env) return env;
  const std::filesystem::path installed = PEDPIPE_DEFAULT_PROMPT_DIR;
  if (std::filesystem::exists(installed / "judge.txt")) return installed;
  return PEDPIPE_SOURCE_PROMPT_DIR;
}

void PromptLibrary::add(PromptTemplate tmpl) {
  std::string id = tmpl.id;
  templates_[id] = std::move(tmpl);
}

const PromptTemplate& PromptLibrary::get(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw ArgumentError("unknown prompt template '" + id + "'");
  return it->second;
}

}  // namespace pedpipe
