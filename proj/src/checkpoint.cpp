#include "gcope/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gcope/error.hpp"

namespace gcope {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t v) {
  char buf[17];
  auto [ptr, ec] = std::to_chars(buf, buf + 16, v, 16);
  std::string s(buf, ptr);
  return std::string(16 - s.size(), '0') + s;
}

namespace {

bool is_token(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == ' ' || c == '\n' || c == '\r' || c == '\t') return false;
  }
  return true;
}

std::string hyper_lines(const std::vector<std::pair<std::string, std::string>>& record) {
  std::string out;
  for (const auto& [k, v] : record) out += "hyper " + k + " " + v + "\n";
  return out;
}

Index parse_index(std::string_view s, const char* what) {
  Index v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) {
    fail(ErrorCode::ParseError, std::string("checkpoint: bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const std::size_t j = line.find(' ', i);
    const std::size_t end = j == std::string_view::npos ? line.size() : j;
    out.push_back(line.substr(i, end - i));
    i = end + 1;
  }
  return out;
}

}  // namespace

std::uint64_t record_fingerprint(const std::vector<std::pair<std::string, std::string>>& record) {
  return fnv1a64(hyper_lines(record));
}

void Checkpoint::set_hyper(const std::string& key, const std::string& value) {
  if (!is_token(key) || !is_token(value)) {
    fail(ErrorCode::InvalidArgument, "hyperparameter '" + key + "' must be a non-empty token without spaces");
  }
  for (auto& [k, v] : hyper) {
    if (k == key) {
      v = value;
      return;
    }
  }
  hyper.emplace_back(key, value);
}

bool Checkpoint::has_hyper(const std::string& key) const {
  for (const auto& [k, v] : hyper)
    if (k == key) return true;
  return false;
}

const std::string& Checkpoint::hyper_value(const std::string& key) const {
  for (const auto& [k, v] : hyper)
    if (k == key) return v;
  fail(ErrorCode::ParseError, "checkpoint has no hyperparameter '" + key + "'");
}

std::uint64_t Checkpoint::fingerprint() const { return record_fingerprint(hyper); }

void Checkpoint::add(const Param& p) {
  if (!is_token(p.name)) fail(ErrorCode::InvalidArgument, "tensor name '" + p.name + "' is not a token");
  if (find(p.name) != nullptr) fail(ErrorCode::InvalidArgument, "duplicate tensor '" + p.name + "'");
  Tensor t{p.name, p.value.rows(), p.value.cols(), {}};
  t.data.resize(static_cast<std::size_t>(p.value.size()));
  for (Index i = 0; i < p.value.size(); ++i) t.data[i] = static_cast<float>(p.value.data()[i]);
  tensors.push_back(std::move(t));
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void Checkpoint::restore(Param& p) const {
  const Tensor* t = find(p.name);
  if (t == nullptr) fail(ErrorCode::ParseError, "checkpoint has no tensor '" + p.name + "'");
  if (t->rows != p.value.rows() || t->cols != p.value.cols()) {
    fail(ErrorCode::ShapeMismatch, "tensor " + p.name + " is " + std::to_string(t->rows) + "x" +
                                       std::to_string(t->cols) + ", model expects " +
                                       std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols()));
  }
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<double>(t->data[i]);
  p.zero_grad();
}

std::string serialize(const Checkpoint& ckpt) {
  std::string out(kCheckpointMagic);
  out += "\nfingerprint " + to_hex(ckpt.fingerprint()) + "\n";
  out += hyper_lines(ckpt.hyper);
  Index offset = 0;
  for (const auto& t : ckpt.tensors) {
    out += "tensor " + t.name + " " + std::to_string(t.rows) + " " + std::to_string(t.cols) + " " +
           std::to_string(offset) + "\n";
    offset += t.rows * t.cols;
  }
  out += "payload " + std::to_string(offset) + "\n";
  out.reserve(out.size() + static_cast<std::size_t>(offset) * 4);
  for (const auto& t : ckpt.tensors) {
    for (float f : t.data) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
  }
  return out;
}

Checkpoint deserialize(std::string_view bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string_view {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) fail(ErrorCode::ParseError, "checkpoint header is truncated");
    std::string_view line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };

  if (next_line() != kCheckpointMagic) fail(ErrorCode::ParseError, "not a checkpoint (bad magic)");
  const auto fp_fields = split_spaces(next_line());
  if (fp_fields.size() != 2 || fp_fields[0] != "fingerprint") fail(ErrorCode::ParseError, "checkpoint: missing fingerprint");

  Checkpoint ckpt;
  Index expected_offset = 0;
  Index payload = -1;
  while (payload < 0) {
    const auto f = split_spaces(next_line());
    if (f.empty()) fail(ErrorCode::ParseError, "checkpoint: empty header line");
    if (f[0] == "hyper" && f.size() == 3) {
      ckpt.hyper.emplace_back(std::string(f[1]), std::string(f[2]));
    } else if (f[0] == "tensor" && f.size() == 5) {
      Tensor t{std::string(f[1]), parse_index(f[2], "rows"), parse_index(f[3], "cols"), {}};
      if (parse_index(f[4], "offset") != expected_offset) {
        fail(ErrorCode::ParseError, "checkpoint: tensor " + t.name + " offset out of order");
      }
      expected_offset += t.rows * t.cols;
      ckpt.tensors.push_back(std::move(t));
    } else if (f[0] == "payload" && f.size() == 2) {
      payload = parse_index(f[1], "payload size");
    } else {
      fail(ErrorCode::ParseError, "checkpoint: unrecognized header line '" + std::string(f[0]) + "'");
    }
  }
  if (payload != expected_offset) fail(ErrorCode::ParseError, "checkpoint: payload size disagrees with manifest");
  if (bytes.size() - pos != static_cast<std::size_t>(payload) * 4) {
    fail(ErrorCode::ParseError, "checkpoint: payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                                    std::to_string(payload * 4));
  }
  if (to_hex(ckpt.fingerprint()) != fp_fields[1]) {
    fail(ErrorCode::ParseError, "checkpoint: fingerprint does not match hyperparameter record");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (auto& t : ckpt.tensors) {
    t.data.resize(static_cast<std::size_t>(t.rows * t.cols));
    for (float& v : t.data) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
      v = std::bit_cast<float>(bits);
      p += 4;
    }
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MissingFile, "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace gcope
