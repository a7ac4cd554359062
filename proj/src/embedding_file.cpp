#include "cxr/embedding_file.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace cxr {

namespace {

constexpr char kMagic[4] = {'L', 'B', 'E', '1'};
constexpr std::uint32_t kVersion = 1;

void write_string(std::ofstream& out, const std::string& s) {
  const std::uint64_t len = s.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(s.data(), static_cast<std::streamsize>(len));
}

std::string read_string(std::ifstream& in) {
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("embedding file: truncated string field");
  return s;
}

}  // namespace

void write_embedding_file(const std::string& path,
                          const EmbeddingTable& table) {
  table.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embedding file: " + path);
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  const std::uint64_t rows = static_cast<std::uint64_t>(table.n_rows());
  const std::uint64_t dim = static_cast<std::uint64_t>(table.n_features());
  const std::uint64_t n_classes = static_cast<std::uint64_t>(table.n_classes());
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  out.write(reinterpret_cast<const char*>(&n_classes), sizeof(n_classes));
  out.write(reinterpret_cast<const char*>(table.features.data()),
            static_cast<std::streamsize>(sizeof(Scalar) * rows * dim));
  std::vector<std::uint8_t> target_bytes(rows * n_classes);
  for (std::uint64_t r = 0; r < rows; ++r)
    for (std::uint64_t c = 0; c < n_classes; ++c)
      target_bytes[r * n_classes + c] =
          table.targets(static_cast<Index>(r), static_cast<Index>(c)) ? 1 : 0;
  out.write(reinterpret_cast<const char*>(target_bytes.data()),
            static_cast<std::streamsize>(target_bytes.size()));
  write_string(out, table.source_tag);
  for (const auto& name : table.class_names) write_string(out, name);
  const std::uint64_t n_ids = table.row_ids.size();
  out.write(reinterpret_cast<const char*>(&n_ids), sizeof(n_ids));
  for (const auto& id : table.row_ids) write_string(out, id);
  if (!out) throw DataError("embedding file write failed: " + path);
}

EmbeddingTable read_embedding_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("not an embedding file: " + path);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kVersion)
    throw DataError("unsupported embedding file version in " + path);
  std::uint64_t rows = 0, dim = 0, n_classes = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  in.read(reinterpret_cast<char*>(&n_classes), sizeof(n_classes));
  if (!in) throw DataError("embedding file: truncated header");

  EmbeddingTable table;
  table.features.resize(static_cast<Index>(rows), static_cast<Index>(dim));
  in.read(reinterpret_cast<char*>(table.features.data()),
          static_cast<std::streamsize>(sizeof(Scalar) * rows * dim));
  std::vector<std::uint8_t> target_bytes(rows * n_classes);
  in.read(reinterpret_cast<char*>(target_bytes.data()),
          static_cast<std::streamsize>(target_bytes.size()));
  if (!in) throw DataError("embedding file: truncated data block");
  table.targets.resize(static_cast<Index>(rows), static_cast<Index>(n_classes));
  for (std::uint64_t r = 0; r < rows; ++r)
    for (std::uint64_t c = 0; c < n_classes; ++c)
      table.targets(static_cast<Index>(r), static_cast<Index>(c)) =
          target_bytes[r * n_classes + c] != 0;
  table.source_tag = read_string(in);
  for (std::uint64_t c = 0; c < n_classes; ++c)
    table.class_names.push_back(read_string(in));
  std::uint64_t n_ids = 0;
  in.read(reinterpret_cast<char*>(&n_ids), sizeof(n_ids));
  for (std::uint64_t i = 0; i < n_ids; ++i)
    table.row_ids.push_back(read_string(in));
  table.validate();
  return table;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for digest: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buffer[4096];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buffer[i]);
      h *= 0x100000001b3ull;
    }
    if (in.eof()) break;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

}  // namespace cxr
