#include "livewire/volume_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace livewire {

namespace {

using nlohmann::json;

std::string line_tag(int line) { return "line " + std::to_string(line); }

/// Whitespace tokenizer that remembers the line of the token it just returned.
class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  bool next(std::string& token) {
    token.clear();
    int c;
    while ((c = in_.get()) != EOF) {
      if (c == '\n') ++line_;
      if (!std::isspace(c)) break;
    }
    if (c == EOF) return false;
    token_line_ = line_;
    token.push_back(static_cast<char>(c));
    while ((c = in_.peek()) != EOF && !std::isspace(c)) token.push_back(static_cast<char>(in_.get()));
    return true;
  }

  int line() const noexcept { return token_line_; }

 private:
  std::istream& in_;
  int line_ = 1;
  int token_line_ = 1;
};

int parse_int(const std::string& token, const std::string& where) {
  if (token.empty() || token.size() > 9 ||
      !std::all_of(token.begin(), token.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
    throw FormatError("expected a non-negative integer, got '" + token + "'", where);
  }
  return std::stoi(token);
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

Volume load_manifest(std::istream& in, const std::filesystem::path& base) {
  std::vector<Image> slices;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    std::filesystem::path p = line.substr(first, last - first + 1);
    if (p.is_relative()) p = base / p;
    Image img;
    try {
      img = load_pgm(p);
    } catch (const FormatError& e) {
      throw FormatError(e.what(), "manifest " + line_tag(line_no));
    }
    if (!slices.empty() && img.size() != slices.front().size()) {
      throw FormatError("slice dimensions differ from the first slice", "manifest " + line_tag(line_no));
    }
    slices.push_back(std::move(img));
  }
  if (slices.empty()) throw FormatError("manifest lists no slices", "manifest");
  Volume v(slices.front().width(), slices.front().height(), static_cast<int>(slices.size()));
  for (int k = 0; k < v.depth(); ++k) v.set_slice(k, slices[k]);
  return v;
}

}  // namespace

Volume::Volume(int width, int height, int depth, double spacing)
    : width_(width), height_(height), depth_(depth), spacing_(spacing) {
  // Smaller than 3x3 is storable; cost computation rejects it.
  if (width < 1 || height < 1 || depth < 1) {
    throw InvalidArgument("volume dimensions must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height) + "x" + std::to_string(depth));
  }
  set_spacing(spacing);
  voxels_.assign(static_cast<std::size_t>(width) * height * depth, 0);
}

void Volume::set_spacing(double spacing) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw InvalidArgument("slice spacing must be positive");
  spacing_ = spacing;
}

Image Volume::slice(int k) const {
  if (k < 0 || k >= depth_) {
    throw InvalidArgument("slice index " + std::to_string(k) + " out of range [0, " + std::to_string(depth_) + ")");
  }
  Image img(width_, height_);
  auto src = voxels_.begin() + static_cast<std::ptrdiff_t>(offset(0, 0, k));
  std::copy(src, src + static_cast<std::ptrdiff_t>(img.values().size()), img.values().begin());
  return img;
}

void Volume::set_slice(int k, const Image& img) {
  if (k < 0 || k >= depth_) throw InvalidArgument("slice index out of range");
  if (img.size() != slice_size()) throw InvalidArgument("slice dimensions do not match volume");
  std::copy(img.values().begin(), img.values().end(), voxels_.begin() + static_cast<std::ptrdiff_t>(offset(0, 0, k)));
}

const ContourSet::SliceContour* ContourSet::find(int slice_index) const {
  auto it = std::lower_bound(slices.begin(), slices.end(), slice_index,
                             [](const SliceContour& s, int i) { return s.index < i; });
  return it != slices.end() && it->index == slice_index ? &*it : nullptr;
}

void ContourSet::validate() const {
  if (!(spacing > 0.0)) throw InvalidArgument("contour set spacing must be positive");
  for (std::size_t i = 1; i < slices.size(); ++i) {
    if (slices[i].index <= slices[i - 1].index) throw InvalidArgument("slice indices must be strictly increasing");
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].first > segments[i].second) throw InvalidArgument("segment range is reversed");
    if (i > 0 && segments[i].first <= segments[i - 1].second) {
      throw InvalidArgument("segment ranges must be ordered and non-overlapping");
    }
  }
}

// LWV1 ---------------------------------------------------------------------

Volume parse_lwv1(std::istream& in) {
  TokenReader reader(in);
  std::string tok;
  if (!reader.next(tok) || tok != "LWV1") throw FormatError("missing LWV1 magic", line_tag(1));
  int dims[3];
  const char* names[3] = {"width", "height", "depth"};
  for (int i = 0; i < 3; ++i) {
    if (!reader.next(tok)) throw FormatError(std::string("header is missing ") + names[i], line_tag(1));
    if (reader.line() != 1) throw FormatError("header must fit on the first line", line_tag(reader.line()));
    dims[i] = parse_int(tok, line_tag(1));
  }
  Volume v;
  try {
    v = Volume(dims[0], dims[1], dims[2]);
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what(), line_tag(1));
  }
  std::size_t expected = v.voxels().size();
  std::size_t n = 0;
  while (reader.next(tok)) {
    std::string where = line_tag(reader.line());
    if (n == expected) throw FormatError("unexpected data after the last slice", where);
    int value = parse_int(tok, where);
    if (value > 255) throw FormatError("intensity " + tok + " outside [0,255]", where);
    v.voxels()[n++] = static_cast<std::uint8_t>(value);
  }
  if (n != expected) {
    throw FormatError("truncated data: expected " + std::to_string(expected) + " values, found " + std::to_string(n),
                      "value offset " + std::to_string(n));
  }
  return v;
}

void write_lwv1(const Volume& v, std::ostream& out) {
  out << "LWV1 " << v.width() << ' ' << v.height() << ' ' << v.depth() << '\n';
  for (int z = 0; z < v.depth(); ++z) {
    for (int y = 0; y < v.height(); ++y) {
      for (int x = 0; x < v.width(); ++x) {
        if (x) out << ' ';
        out << static_cast<int>(v.at(x, y, z));
      }
      out << '\n';
    }
  }
}

Volume load_volume(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string magic(4, '\0');
  in.read(magic.data(), 4);
  in.clear();
  in.seekg(0);
  if (magic == "LWV1") return parse_lwv1(in);
  return load_manifest(in, path.parent_path());
}

void save_volume(const Volume& v, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_lwv1(v, out);
  if (!out) throw IoError("write failed: " + path.string());
}

// PGM ----------------------------------------------------------------------

Image parse_pgm(std::istream& in) {
  auto header_token = [&](const char* what) {
    std::string tok;
    int c;
    for (;;) {
      c = in.get();
      if (c == EOF) throw FormatError(std::string("PGM header ended before ") + what, "header");
      if (c == '#') {
        while ((c = in.get()) != EOF && c != '\n') {
        }
        continue;
      }
      if (!std::isspace(c)) break;
    }
    tok.push_back(static_cast<char>(c));
    while ((c = in.peek()) != EOF && !std::isspace(c) && c != '#') tok.push_back(static_cast<char>(in.get()));
    return tok;
  };
  std::string magic = header_token("magic");
  if (magic != "P2" && magic != "P5") throw FormatError("not a P2/P5 PGM (magic '" + magic + "')", "header");
  int w = parse_int(header_token("width"), "header");
  int h = parse_int(header_token("height"), "header");
  int maxval = parse_int(header_token("maxval"), "header");
  if (maxval < 1 || maxval > 255) throw FormatError("maxval must be in [1,255]", "header");
  if (w < 1 || h < 1) throw FormatError("empty PGM", "header");
  Image img(w, h);
  auto values = img.values();
  if (magic == "P5") {
    in.get();  // single whitespace after maxval
    std::streamoff start = in.tellg();
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size()));
    if (static_cast<std::size_t>(in.gcount()) != values.size()) {
      throw FormatError("truncated P5 raster", "byte offset " + std::to_string(start + in.gcount()));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] > maxval) throw FormatError("sample exceeds maxval", "byte offset " + std::to_string(start + i));
    }
  } else {
    TokenReader reader(in);
    std::string tok;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!reader.next(tok)) throw FormatError("truncated P2 raster", "value offset " + std::to_string(i));
      int value = parse_int(tok, "value offset " + std::to_string(i));
      if (value > maxval) throw FormatError("sample exceeds maxval", "value offset " + std::to_string(i));
      values[i] = static_cast<std::uint8_t>(value);
    }
  }
  return img;
}

Image load_pgm(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::binary);
  try {
    return parse_pgm(in);
  } catch (const FormatError& e) {
    throw FormatError(e.what(), path.string());
  }
}

std::string encode_pgm(const Image& img) {
  std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.values().data()), img.values().size());
  return out;
}

void save_pgm(const Image& img, const std::filesystem::path& path) {
  auto out = open_out(path, std::ios::binary);
  out << encode_pgm(img);
  if (!out) throw IoError("write failed: " + path.string());
}

// Contour JSON -------------------------------------------------------------

std::string contours_to_json(const ContourSet& c) {
  c.validate();
  json segments = json::array();
  for (auto [first, last] : c.segments) segments.push_back({first, last});
  json slices = json::array();
  for (const auto& s : c.slices) {
    json pts = json::array();
    for (Pixel p : s.contour) pts.push_back({p.x, p.y});
    slices.push_back({{"index", s.index}, {"contour", std::move(pts)}});
  }
  json doc = {{"spacing", c.spacing}, {"segments", std::move(segments)}, {"slices", std::move(slices)}};
  return doc.dump() + "\n";
}

ContourSet contours_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(e.what(), "byte offset " + std::to_string(e.byte));
  }
  ContourSet c;
  try {
    if (!doc.is_object()) throw FormatError("contour document must be an object", "root");
    c.spacing = doc.at("spacing").get<double>();
    for (const auto& seg : doc.at("segments")) {
      if (!seg.is_array() || seg.size() != 2) throw FormatError("segment must be [first,last]", "segments");
      c.segments.emplace_back(seg[0].get<int>(), seg[1].get<int>());
    }
    for (const auto& s : doc.at("slices")) {
      ContourSet::SliceContour sc;
      sc.index = s.at("index").get<int>();
      for (const auto& p : s.at("contour")) {
        if (!p.is_array() || p.size() != 2) throw FormatError("contour point must be [x,y]", "slice " + std::to_string(sc.index));
        sc.contour.push_back({p[0].get<int>(), p[1].get<int>()});
      }
      c.slices.push_back(std::move(sc));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("schema violation: ") + e.what(), "contours");
  }
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("schema violation: ") + e.what(), "contours");
  }
  return c;
}

void save_contours(const ContourSet& c, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << contours_to_json(c);
  if (!out) throw IoError("write failed: " + path.string());
}

ContourSet load_contours(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return contours_from_json(ss.str());
}

}  // namespace livewire
