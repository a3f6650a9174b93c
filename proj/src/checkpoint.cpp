#include "emlang/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace emlang {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'E', 'M', 'L', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& what) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw io_error("checkpoint: truncated while reading " + what);
  return value;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const std::string& what) {
  const auto len = read_pod<std::uint32_t>(in, what + " length");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw io_error("checkpoint: truncated while reading " + what);
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::string& config_digest,
                     const std::vector<const ad::ParamTensor*>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("checkpoint: cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_string(out, config_digest);
  write_pod(out, static_cast<std::uint64_t>(params.size()));
  for (const ad::ParamTensor* p : params) {
    write_string(out, p->name);
    write_pod(out, static_cast<std::uint64_t>(p->value.rows()));
    write_pod(out, static_cast<std::uint64_t>(p->value.cols()));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!out) throw io_error("checkpoint: write failed for " + path.string());
}

void load_checkpoint(const std::filesystem::path& path,
                     const std::string& expected_digest,
                     const std::vector<ad::ParamTensor*>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw io_error("checkpoint: bad magic in " + path.string());
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kVersion)
    throw io_error("checkpoint: unsupported version " + std::to_string(version));
  const std::string digest = read_string(in, "digest");
  if (!expected_digest.empty() && digest != expected_digest)
    throw io_error("checkpoint: digest mismatch (file " + digest +
                   ", expected " + expected_digest + ")");
  const auto count = read_pod<std::uint64_t>(in, "tensor count");
  if (count != params.size())
    throw io_error("checkpoint: file has " + std::to_string(count) +
                   " tensors, model has " + std::to_string(params.size()));
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = read_string(in, "tensor name");
    const auto rows = read_pod<std::uint64_t>(in, name + " rows");
    const auto cols = read_pod<std::uint64_t>(in, name + " cols");
    ad::ParamTensor* target = nullptr;
    for (ad::ParamTensor* p : params)
      if (p->name == name) target = p;
    if (!target) throw io_error("checkpoint: unexpected tensor '" + name + "'");
    if (static_cast<std::uint64_t>(target->value.rows()) != rows ||
        static_cast<std::uint64_t>(target->value.cols()) != cols)
      throw io_error("checkpoint: tensor '" + name + "' is " +
                     std::to_string(rows) + "x" + std::to_string(cols) +
                     " in file, " +
                     shape_str(target->value.rows(), target->value.cols()) +
                     " in model");
    in.read(reinterpret_cast<char*>(target->value.data()),
            static_cast<std::streamsize>(rows * cols * sizeof(double)));
    if (!in) throw io_error("checkpoint: truncated tensor '" + name + "'");
  }
}

std::string checkpoint_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw io_error("checkpoint: bad magic in " + path.string());
  read_pod<std::uint32_t>(in, "version");
  return read_string(in, "digest");
}

}  // namespace emlang
