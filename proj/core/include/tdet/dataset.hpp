#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tdet/boxes.hpp"
#include "tdet/eval.hpp"
#include "tdet/image.hpp"

namespace tdet {

// Malformed or inconsistent input files; the CLI maps this to exit code 2.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetEntry {
  std::string file;  // relative to <dir>/images
  std::vector<BoxAnnotation> boxes;
};

// On disk:
//   classes.txt      one class name per line, id = line index
//   images.txt       one image file name per line
//   annotations.csv  image_filename,class_id,xmin,ymin,xmax,ymax
//   images/          P5/P6 rasters
//   provenance.txt   seed and config hash of the producing command
struct Dataset {
  std::filesystem::path dir;
  std::vector<std::string> class_names;
  std::vector<DatasetEntry> entries;

  std::filesystem::path image_path(std::size_t i) const;
  Image read_image(std::size_t i) const;
  std::vector<eval::ImageAnnotation> annotations() const;
};

// Validates the whole manifest: files present, ids in range, every
// annotation naming a listed image. Missing images are listed in the error.
Dataset load_dataset(const std::filesystem::path& dir);

struct DatasetImage {
  std::string file;
  Image image;
  std::vector<BoxAnnotation> boxes;
};

// Writes a complete dataset directory (created if needed).
void write_dataset(const std::filesystem::path& dir, const std::vector<std::string>& class_names,
                   const std::vector<DatasetImage>& images, std::string_view provenance);

std::string provenance_text(std::string_view command, std::uint64_t seed,
                            std::uint64_t config_hash);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

// Shortest round-trip decimal form, so CSVs are byte-stable.
std::string format_float(float v);

// Annotation CSV with header; row errors carry the 1-based line number.
std::string annotations_csv(const std::vector<eval::ImageAnnotation>& rows);
std::vector<eval::ImageAnnotation> parse_annotations_csv(std::string_view text);

inline constexpr std::string_view kDetectionsHeader =
    "image_filename,class_id,score,xmin,ymin,xmax,ymax";
std::string detections_csv(const std::vector<eval::ImageDetection>& rows);
std::vector<eval::ImageDetection> parse_detections_csv(std::string_view text);

}  // namespace tdet
