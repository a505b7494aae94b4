// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedpipe/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pedpipe/errors.hpp"

namespace pedpipe {

namespace {

constexpr char kMagic[4] = {'P', 'G', 'P', 'T'};

using Sections = std::map<std::string, std::vector<std::pair<std::string, std::string>>>;

std::string format_double(double v) {
  char buf[40];
  return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const std::string& bytes, std::size_t pos, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  return v;
}

std::string model_section(const ModelConfig& c) {
  std::ostringstream os;
  os << "[model]\n"
     << "vocab_size=" << c.vocab_size << "\n"
     << "d_model=" << c.d_model << "\n"
     << "n_layers=" << c.n_layers << "\n"
     << "n_heads=" << c.n_heads << "\n"
     << "d_ff=" << c.d_ff << "\n"
     << "max_seq_len=" << c.max_seq_len << "\n"
     << "tie_weights=" << (c.tie_weights ? "true" : "false") << "\n";
  return os.str();
}

std::string adapter_section(const AdapterSpec& s) {
  std::ostringstream os;
  os << "[adapters]\n"
     << "specific_experts=" << s.specific_experts << "\n"
     << "rank=" << s.rank << "\n"
     << "alpha=" << format_double(s.alpha) << "\n"
     << "dropout=" << format_double(s.dropout) << "\n"
     << "placement=" << to_string(s.placement) << "\n"
     << "noise=" << (s.noise ? "true" : "false") << "\n";
  return os.str();
}

void write_file(const std::filesystem::path& path, CheckpointKind kind, const std::string& extra_sections,
                const std::vector<NamedParam>& params) {
  std::string payload;
  std::ostringstream tensors;
  tensors << "[tensors]\n";
  for (const auto& p : params) {
    tensors << p.name << '=';
    const auto& shape = p.tensor.shape();
    for (std::size_t i = 0; i < shape.size(); ++i) tensors << (i ? "x" : "") << shape[i];
    tensors << '@' << payload.size() << '\n';
    for (double v : p.tensor.data()) put_u32(payload, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  std::ostringstream manifest;
  manifest << "[checkpoint]\n"
           << "kind=" << (kind == CheckpointKind::base ? "base" : "adapters") << "\n"
           << "tensor_count=" << params.size() << "\n"
           << "payload_bytes=" << payload.size() << "\n"
           << extra_sections << tensors.str();
  const std::string text = manifest.str();

  std::string bytes(kMagic, 4);
  put_u32(bytes, kCheckpointVersion);
  put_u64(bytes, text.size());
  bytes += text;
  bytes += payload;

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

struct ParsedFile {
  CheckpointInfo info;
  Sections sections;
  std::string payload;
};

const std::string& lookup(const Sections& s, const std::string& section, const std::string& key) {
  auto it = s.find(section);
  if (it != s.end()) {
    for (const auto& [k, v] : it->second)
      if (k == key) return v;
  }
  throw CheckpointError("checkpoint manifest lacks [" + section + "] " + key);
}

std::size_t lookup_size(const Sections& s, const std::string& section, const std::string& key) {
  const std::string& v = lookup(s, section, key);
  try {
    std::size_t pos = 0;
    const auto n = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint manifest has non-integer " + key + "=" + v);
  }
}

bool lookup_bool(const Sections& s, const std::string& section, const std::string& key) {
  const std::string& v = lookup(s, section, key);
  if (v == "true") return true;
  if (v == "false") return false;
  throw CheckpointError("checkpoint manifest has non-boolean " + key + "=" + v);
}

double lookup_double(const Sections& s, const std::string& section, const std::string& key) {
  const std::string& v = lookup(s, section, key);
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint manifest has non-numeric " + key + "=" + v);
  }
}

ParsedFile parse_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw CheckpointError("checkpoint truncated before header: " + path.string());
  if (bytes.compare(0, 4, kMagic, 4) != 0) throw CheckpointError("bad checkpoint magic in " + path.string());

  ParsedFile parsed;
  parsed.info.version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (parsed.info.version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(parsed.info.version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t manifest_len = get_le(bytes, 8, 8);
  if (manifest_len > bytes.size() - 16) throw CheckpointError("checkpoint truncated inside manifest: " + path.string());
  parsed.info.manifest = bytes.substr(16, manifest_len);
  parsed.payload = bytes.substr(16 + manifest_len);

  std::istringstream lines(parsed.info.manifest);
  std::string line, section;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      parsed.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty()) throw CheckpointError("malformed manifest line: " + line);
    parsed.sections[section].emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }

  const auto& s = parsed.sections;
  const std::string& kind = lookup(s, "checkpoint", "kind");
  if (kind == "base") {
    parsed.info.kind = CheckpointKind::base;
  } else if (kind == "adapters") {
    parsed.info.kind = CheckpointKind::adapters;
  } else {
    throw CheckpointError("unknown checkpoint kind '" + kind + "'");
  }
  const std::size_t payload_bytes = lookup_size(s, "checkpoint", "payload_bytes");
  if (parsed.payload.size() < payload_bytes) {
    throw CheckpointError("checkpoint truncated: payload has " + std::to_string(parsed.payload.size()) + " of " +
                          std::to_string(payload_bytes) + " bytes");
  }
  if (parsed.payload.size() > payload_bytes) throw CheckpointError("checkpoint has trailing bytes after payload");

  ModelConfig& m = parsed.info.model;
  m.vocab_size = lookup_size(s, "model", "vocab_size");
  m.d_model = lookup_size(s, "model", "d_model");
  m.n_layers = lookup_size(s, "model", "n_layers");
  m.n_heads = lookup_size(s, "model", "n_heads");
  m.d_ff = lookup_size(s, "model", "d_ff");
  m.max_seq_len = lookup_size(s, "model", "max_seq_len");
  m.tie_weights = lookup_bool(s, "model", "tie_weights");
  try {
    m.validate();
  } catch (const ArgumentError& e) {
    throw CheckpointError(std::string("checkpoint model config invalid: ") + e.what());
  }

  if (s.count("adapters")) {
    AdapterSpec spec;
    spec.specific_experts = lookup_size(s, "adapters", "specific_experts");
    spec.rank = lookup_size(s, "adapters", "rank");
    spec.alpha = lookup_double(s, "adapters", "alpha");
    spec.dropout = lookup_double(s, "adapters", "dropout");
    spec.placement = adapter_placement_from_string(lookup(s, "adapters", "placement"));
    spec.noise = lookup_bool(s, "adapters", "noise");
    parsed.info.adapters = spec;
  }

  auto tensors = s.find("tensors");
  const std::size_t count = lookup_size(s, "checkpoint", "tensor_count");
  if (tensors == s.end() || tensors->second.size() != count) {
    throw CheckpointError("checkpoint tensor table does not list " + std::to_string(count) + " tensors");
  }
  for (const auto& [name, desc] : tensors->second) {
    CheckpointTensorInfo t;
    t.name = name;
    const auto at = desc.find('@');
    if (at == std::string::npos) throw CheckpointError("malformed tensor entry " + name + "=" + desc);
    std::istringstream dims(desc.substr(0, at));
    std::string tok;
    while (std::getline(dims, tok, 'x')) {
      if (!tok.empty()) t.shape.push_back(std::stoull(tok));
    }
    t.offset = std::stoull(desc.substr(at + 1));
    if (t.offset + shape_numel(t.shape) * 4 > payload_bytes) {
      throw CheckpointError("tensor " + name + " extends past the payload");
    }
    parsed.info.total_parameters += shape_numel(t.shape);
    parsed.info.tensors.push_back(std::move(t));
  }
  return parsed;
}

// Copies stored values into every parameter, checking names and shapes.
void fill_params(const ParsedFile& parsed, const std::vector<NamedParam>& params) {
  if (params.size() != parsed.info.tensors.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(parsed.info.tensors.size()) + " tensors, model expects " +
                          std::to_string(params.size()));
  }
  std::map<std::string, const CheckpointTensorInfo*> by_name;
  for (const auto& t : parsed.info.tensors) by_name[t.name] = &t;
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw CheckpointError("checkpoint is missing tensor " + p.name);
    const auto& info = *it->second;
    if (info.shape != p.tensor.shape()) {
      throw CheckpointError("tensor " + p.name + " has shape " + shape_str(info.shape) + ", expected " +
                            shape_str(p.tensor.shape()));
    }
    Tensor t = p.tensor;
    auto dst = t.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      const auto bits = static_cast<std::uint32_t>(get_le(parsed.payload, info.offset + 4 * i, 4));
      dst[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TransformerWeights& weights) {
  write_file(path, CheckpointKind::base, model_section(weights.config), weights.parameters());
}

TransformerWeights load_checkpoint(const std::filesystem::path& path) {
  const ParsedFile parsed = parse_file(path);
  if (parsed.info.kind != CheckpointKind::base) throw CheckpointError(path.string() + " is an adapter checkpoint");
  Rng scratch(0);
  TransformerWeights w = TransformerWeights::init(parsed.info.model, scratch);
  fill_params(parsed, w.parameters());
  return w;
}

void save_adapter_checkpoint(const std::filesystem::path& path, const AdapterSet& adapters, const ModelConfig& model) {
  write_file(path, CheckpointKind::adapters, model_section(model) + adapter_section(adapters.spec()),
             adapters.parameters());
}

AdapterSet load_adapter_checkpoint(const std::filesystem::path& path, const ModelConfig* expected) {
  const ParsedFile parsed = parse_file(path);
  if (parsed.info.kind != CheckpointKind::adapters || !parsed.info.adapters) {
    throw CheckpointError(path.string() + " is not an adapter checkpoint");
  }
  if (expected && !(*expected == parsed.info.model)) {
    throw CheckpointError("adapter checkpoint was trained for a different model configuration");
  }
  Rng scratch(0);
  AdapterSet set = AdapterSet::attach(parsed.info.model, *parsed.info.adapters, scratch);
  fill_params(parsed, set.parameters());
  return set;
}

CheckpointInfo inspect_checkpoint(const std::filesystem::path& path) { return parse_file(path).info; }

std::string describe_checkpoint(const CheckpointInfo& info) {
  std::ostringstream os;
  os << "format version: " << info.version << "\n"
     << "kind: " << (info.kind == CheckpointKind::base ? "base" : "adapters") << "\n"
     << "model: vocab=" << info.model.vocab_size << " d_model=" << info.model.d_model
     << " layers=" << info.model.n_layers << " heads=" << info.model.n_heads << " d_ff=" << info.model.d_ff
     << " max_seq_len=" << info.model.max_seq_len << " tied=" << (info.model.tie_weights ? "yes" : "no") << "\n";
  if (info.adapters) {
    const auto& a = *info.adapters;
    os << "adapters: T=" << a.specific_experts << " r=" << a.rank << " alpha=" << format_double(a.alpha)
       << " dropout=" << format_double(a.dropout) << " placement=" << to_string(a.placement)
       << " noise=" << (a.noise ? "on" : "off") << "\n";
  }
  os << "tensors: " << info.tensors.size() << "\n";
  for (const auto& t : info.tensors) os << "  " << t.name << " " << shape_str(t.shape) << "\n";
  os << "total parameters: " << info.total_parameters << "\n";
  return os.str();
}

}  // namespace pedpipe
