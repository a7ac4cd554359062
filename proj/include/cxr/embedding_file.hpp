#pragma once

#include <string>

#include "cxr/classifiers.hpp"

namespace cxr {

/// Binary embedding container ("LBE1"): header, 64-bit little-endian features
/// row-major, aligned targets block, then source tag, class names and row ids.
void write_embedding_file(const std::string& path, const EmbeddingTable& table);
EmbeddingTable read_embedding_file(const std::string& path);

/// FNV-1a digest of a file's bytes, hex-encoded.
std::string file_digest(const std::string& path);

}  // namespace cxr
