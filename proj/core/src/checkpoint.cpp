#include "gatedgeom/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>

#include "gatedgeom/errors.hpp"
#include "gatedgeom/format.hpp"
#include "json.hpp"

namespace gatedgeom {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::vector<std::uint8_t> to_bytes(const Mat& m) {
  static_assert(std::endian::native == std::endian::little, "checkpoints assume little-endian hosts");
  std::vector<std::uint8_t> out(static_cast<std::size_t>(m.size()) * 8);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c, k += 8) {
      const double v = m(r, c);
      std::memcpy(out.data() + k, &v, 8);
    }
  return out;
}

}  // namespace

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ConfigError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::array<int, 4> v{};
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
        continue;
      }
      if (pad > 0) throw ConfigError("malformed base64 padding");
      v[k] = decode_char(c);
      if (v[k] < 0) throw ConfigError("invalid base64 character");
    }
    const std::uint32_t w = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<std::uint8_t>(w >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(w >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(w));
  }
  return out;
}

std::string checkpoint_json(const ModelParams& params) {
  nlohmann::ordered_json j;
  j["format"] = "gatedgeom-checkpoint";
  j["version"] = 1;
  j["gate_variant"] = std::string(to_string(params.gate.variant));
  j["gate_alpha"] = params.gate.alpha;
  j["attention_scale"] = params.attention.scale;
  j["layernorm_eps"] = params.layernorm_eps;
  j["use_layernorm"] = params.use_layernorm;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::object();
  for (const auto& t : params.tensors()) {
    tensors[t.name] = {{"shape", {t.tensor->rows(), t.tensor->cols()}},
                       {"data", base64_encode(to_bytes(*t.tensor))}};
  }
  j["tensors"] = std::move(tensors);
  return j.dump(1) + "\n";
}

ModelParams checkpoint_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("format") || j["format"] != "gatedgeom-checkpoint") throw ConfigError("not a checkpoint file");
  ModelParams p;
  try {
    p.gate.variant = parse_gate_variant(j.at("gate_variant").get<std::string>());
    p.gate.alpha = j.at("gate_alpha").get<double>();
    p.attention.scale = j.at("attention_scale").get<double>();
    p.layernorm_eps = j.at("layernorm_eps").get<double>();
    p.use_layernorm = j.at("use_layernorm").get<bool>();
    const auto& tensors = j.at("tensors");
    for (auto& t : p.tensors()) {
      const auto& entry = tensors.at(t.name);
      const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
      const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
      const auto bytes = base64_decode(entry.at("data").get<std::string>());
      if (bytes.size() != static_cast<std::size_t>(rows * cols) * 8) {
        throw ConfigError("payload size does not match the shape of " + t.name);
      }
      t.tensor->resize(rows, cols);
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c, k += 8) {
          double v;
          std::memcpy(&v, bytes.data() + k, 8);
          (*t.tensor)(r, c) = v;
        }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
  return p;
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
  write_file_atomic(path, checkpoint_json(params));
}

ModelParams load_checkpoint(const std::string& path) { return checkpoint_from_json(read_file(path)); }

}  // namespace gatedgeom
