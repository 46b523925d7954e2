#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "tdet/image.hpp"

namespace tdet {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary PGM (P5) / PPM (P6), maxval 255 only.
Image read_pnm(const std::filesystem::path& path);
Image decode_pnm(const std::string& bytes);
void write_pnm(const std::filesystem::path& path, const Image& img);
std::string encode_pnm(const Image& img);

}  // namespace tdet
