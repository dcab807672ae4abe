#include "levybench/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "levybench/errors.hpp"

namespace levybench {

namespace {

constexpr char kMagic[8] = {'L', 'V', 'Y', 'B', 'E', 'N', 'C', 'H'};

void put_u64(std::string& out, std::uint64_t value) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFFu));
}

std::uint64_t get_u64(const std::string& in, std::size_t offset) {
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) {
    value |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + static_cast<std::size_t>(i)])) << (8 * i);
  }
  return value;
}

}  // namespace

std::string encode_container(const Container& c) {
  nlohmann::json header = c.header;
  header["payload_doubles"] = c.payload.size();
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + 8 * c.payload.size());
  for (double v : c.payload) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Container decode_container(const std::string& bytes) {
  if (bytes.size() < 16) throw ParseError("container shorter than its preamble", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw ParseError("bad magic", 0);
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (header_len > bytes.size() - 16) throw ParseError("truncated header", bytes.size());

  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed header: ") + e.what(), 16 + e.byte);
  }
  if (!c.header.is_object() || !c.header.contains("version") || !c.header.contains("payload_doubles")) {
    throw ParseError("header lacks version or payload size", 16);
  }
  if (c.header["version"] != kContainerVersion) {
    throw UnsupportedVersionError("unsupported container version " + c.header["version"].dump());
  }

  const std::size_t offset = 16 + header_len;
  const auto count = c.header["payload_doubles"].get<std::uint64_t>();
  const std::size_t available = (bytes.size() - offset) / 8;
  if (count > available) throw ParseError("truncated payload", bytes.size());
  if ((bytes.size() - offset) != 8 * count) throw ParseError("trailing bytes after payload", offset + 8 * count);
  c.payload.resize(count);
  for (std::size_t i = 0; i < count; ++i) c.payload[i] = std::bit_cast<double>(get_u64(bytes, offset + 8 * i));
  return c;
}

void write_file_atomically(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

void write_container(const std::filesystem::path& path, const Container& c) {
  write_file_atomically(path, encode_container(c));
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return decode_container(buffer.str());
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    hash ^= ch;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xFu];
    value >>= 4;
  }
  return out;
}

}  // namespace levybench
