#include "tdet/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "tdet/config.hpp"
#include "tdet/pnm.hpp"

namespace tdet {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kAnnotationsHeader = "image_filename,class_id,xmin,ymin,xmax,ymax";

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    lines.push_back(strip_cr(text.substr(0, nl)));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  for (;;) {
    const auto comma = line.find(',');
    fields.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return fields;
}

[[noreturn]] void row_error(std::size_t line, const std::string& what) {
  throw DatasetError("line " + std::to_string(line) + ": " + what);
}

float parse_float_field(std::string_view s, std::size_t line) {
  float v = 0.0f;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    row_error(line, "bad number '" + std::string(s) + "'");
  }
  return v;
}

int parse_int_field(std::string_view s, std::size_t line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    row_error(line, "bad integer '" + std::string(s) + "'");
  }
  return v;
}

Box parse_box(const std::vector<std::string_view>& f, std::size_t first, std::size_t line) {
  const Box b{parse_float_field(f[first], line), parse_float_field(f[first + 1], line),
              parse_float_field(f[first + 2], line), parse_float_field(f[first + 3], line)};
  if (!b.valid()) row_error(line, "box must satisfy xmin < xmax and ymin < ymax");
  return b;
}

// Returns data lines after checking the header; line numbers are 1-based.
std::vector<std::pair<std::size_t, std::string_view>> csv_body(std::string_view text,
                                                               std::string_view header) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines.front() != header) {
    throw DatasetError("line 1: expected header '" + std::string(header) + "'");
  }
  std::vector<std::pair<std::size_t, std::string_view>> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    out.emplace_back(i + 1, lines[i]);
  }
  return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
  const std::string text = read_text_file(path);
  std::vector<std::string> out;
  for (const auto line : split_lines(text)) {
    if (!line.empty()) out.emplace_back(line);
  }
  return out;
}

}  // namespace

std::string format_float(float v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DatasetError("write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string annotations_csv(const std::vector<eval::ImageAnnotation>& rows) {
  std::string out(kAnnotationsHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += r.image + ',' + std::to_string(r.ann.class_id) + ',' + format_float(r.ann.box.xmin) +
           ',' + format_float(r.ann.box.ymin) + ',' + format_float(r.ann.box.xmax) + ',' +
           format_float(r.ann.box.ymax) + '\n';
  }
  return out;
}

std::vector<eval::ImageAnnotation> parse_annotations_csv(std::string_view text) {
  std::vector<eval::ImageAnnotation> rows;
  for (const auto& [line_no, line] : csv_body(text, kAnnotationsHeader)) {
    const auto f = split_fields(line);
    if (f.size() != 6) row_error(line_no, "expected 6 fields");
    if (f[0].empty()) row_error(line_no, "empty image_filename");
    eval::ImageAnnotation a;
    a.image = std::string(f[0]);
    a.ann.class_id = parse_int_field(f[1], line_no);
    if (a.ann.class_id < 0) row_error(line_no, "negative class_id");
    a.ann.box = parse_box(f, 2, line_no);
    rows.push_back(std::move(a));
  }
  return rows;
}

std::string detections_csv(const std::vector<eval::ImageDetection>& rows) {
  std::string out(kDetectionsHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += r.image + ',' + std::to_string(r.det.class_id) + ',' + format_float(r.det.score) + ',' +
           format_float(r.det.box.xmin) + ',' + format_float(r.det.box.ymin) + ',' +
           format_float(r.det.box.xmax) + ',' + format_float(r.det.box.ymax) + '\n';
  }
  return out;
}

std::vector<eval::ImageDetection> parse_detections_csv(std::string_view text) {
  std::vector<eval::ImageDetection> rows;
  for (const auto& [line_no, line] : csv_body(text, kDetectionsHeader)) {
    const auto f = split_fields(line);
    if (f.size() != 7) row_error(line_no, "expected 7 fields");
    if (f[0].empty()) row_error(line_no, "empty image_filename");
    eval::ImageDetection d;
    d.image = std::string(f[0]);
    d.det.class_id = parse_int_field(f[1], line_no);
    if (d.det.class_id < 0) row_error(line_no, "negative class_id");
    d.det.score = parse_float_field(f[2], line_no);
    if (d.det.score < 0.0f || d.det.score > 1.0f) row_error(line_no, "score outside [0, 1]");
    d.det.box = parse_box(f, 3, line_no);
    rows.push_back(std::move(d));
  }
  return rows;
}

fs::path Dataset::image_path(std::size_t i) const { return dir / "images" / entries.at(i).file; }

Image Dataset::read_image(std::size_t i) const { return read_pnm(image_path(i)); }

std::vector<eval::ImageAnnotation> Dataset::annotations() const {
  std::vector<eval::ImageAnnotation> out;
  for (const auto& e : entries) {
    for (const auto& b : e.boxes) out.push_back({e.file, b});
  }
  return out;
}

Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  ds.dir = dir;
  if (!fs::is_directory(dir)) throw DatasetError("dataset directory not found: " + dir.string());
  ds.class_names = read_lines(dir / "classes.txt");
  if (ds.class_names.empty()) throw DatasetError("classes.txt lists no classes");
  std::unordered_map<std::string, std::size_t> index;
  std::string missing;
  for (auto& file : read_lines(dir / "images.txt")) {
    if (index.count(file) != 0) throw DatasetError("images.txt: duplicate entry " + file);
    if (!fs::is_regular_file(dir / "images" / file)) missing += "\n  " + file;
    index.emplace(file, ds.entries.size());
    ds.entries.push_back({std::move(file), {}});
  }
  if (!missing.empty()) throw DatasetError("missing image files:" + missing);
  const fs::path ann_path = dir / "annotations.csv";
  std::vector<eval::ImageAnnotation> rows;
  try {
    rows = parse_annotations_csv(read_text_file(ann_path));
  } catch (const DatasetError& e) {
    throw DatasetError(ann_path.string() + ": " + e.what());
  }
  for (const auto& r : rows) {
    const auto it = index.find(r.image);
    if (it == index.end()) {
      throw DatasetError(ann_path.string() + ": annotation for unlisted image " + r.image);
    }
    if (r.ann.class_id >= static_cast<int>(ds.class_names.size())) {
      throw DatasetError(ann_path.string() + ": class_id " + std::to_string(r.ann.class_id) +
                         " outside class table");
    }
    ds.entries[it->second].boxes.push_back(r.ann);
  }
  return ds;
}

void write_dataset(const fs::path& dir, const std::vector<std::string>& class_names,
                   const std::vector<DatasetImage>& images, std::string_view provenance) {
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  if (ec) throw DatasetError("cannot create " + (dir / "images").string() + ": " + ec.message());
  std::string classes;
  for (const auto& c : class_names) classes += c + '\n';
  std::string listing;
  std::vector<eval::ImageAnnotation> rows;
  for (const auto& img : images) {
    write_pnm(dir / "images" / img.file, img.image);
    listing += img.file + '\n';
    for (const auto& b : img.boxes) rows.push_back({img.file, b});
  }
  write_text_file(dir / "classes.txt", classes);
  write_text_file(dir / "images.txt", listing);
  write_text_file(dir / "annotations.csv", annotations_csv(rows));
  write_text_file(dir / "provenance.txt", provenance);
}

std::string provenance_text(std::string_view command, std::uint64_t seed,
                            std::uint64_t config_hash) {
  std::string out = "command=" + std::string(command) + '\n';
  out += "seed=" + std::to_string(seed) + '\n';
  out += "config_hash=" + hex64(config_hash) + '\n';
  return out;
}

}  // namespace tdet
