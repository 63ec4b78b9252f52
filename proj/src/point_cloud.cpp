#include "edgereg/point_cloud.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "edgereg/errors.hpp"

namespace edgereg {

void PointCloud::validate() const {
  const auto n = points.size();
  if ((!intensity.empty() && intensity.size() != n) || (!rgb.empty() && rgb.size() != n) ||
      (!scan_id.empty() && scan_id.size() != n)) {
    throw InvalidArgument("point cloud: attribute channel length differs from point count");
  }
  for (float v : intensity) {
    if (!(v >= 0.0f && v <= 1.0f)) throw InvalidArgument("point cloud: intensity outside [0,1]");
  }
}

PointCloud PointCloud::subset(std::span<const std::uint32_t> indices) const {
  PointCloud out;
  out.points.reserve(indices.size());
  for (auto i : indices) {
    out.points.push_back(points[i]);
    if (has_intensity()) out.intensity.push_back(intensity[i]);
    if (has_rgb()) out.rgb.push_back(rgb[i]);
    if (has_scan_id()) out.scan_id.push_back(scan_id[i]);
  }
  return out;
}

void PointCloud::append(const PointCloud& other) {
  const auto n0 = size();
  const auto n1 = other.size();
  auto merge = [&](auto& mine, const auto& theirs, auto fill) {
    if (mine.empty() && theirs.empty()) return;
    mine.resize(n0, fill);
    if (theirs.empty()) {
      mine.resize(n0 + n1, fill);
    } else {
      mine.insert(mine.end(), theirs.begin(), theirs.end());
    }
  };
  merge(intensity, other.intensity, 0.0f);
  merge(rgb, other.rgb, Rgb{});
  merge(scan_id, other.scan_id, std::int32_t{-1});
  points.insert(points.end(), other.points.begin(), other.points.end());
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

enum class ScalarType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

std::optional<ScalarType> parse_scalar_type(std::string_view s) {
  if (s == "char" || s == "int8") return ScalarType::kInt8;
  if (s == "uchar" || s == "uint8") return ScalarType::kUint8;
  if (s == "short" || s == "int16") return ScalarType::kInt16;
  if (s == "ushort" || s == "uint16") return ScalarType::kUint16;
  if (s == "int" || s == "int32") return ScalarType::kInt32;
  if (s == "uint" || s == "uint32") return ScalarType::kUint32;
  if (s == "float" || s == "float32") return ScalarType::kFloat32;
  if (s == "double" || s == "float64") return ScalarType::kFloat64;
  return std::nullopt;
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::kInt8:
    case ScalarType::kUint8:
      return 1;
    case ScalarType::kInt16:
    case ScalarType::kUint16:
      return 2;
    case ScalarType::kInt32:
    case ScalarType::kUint32:
    case ScalarType::kFloat32:
      return 4;
    case ScalarType::kFloat64:
      return 8;
  }
  return 0;
}

template <typename T>
T load_le(const char* p) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts not supported");
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double load_scalar(ScalarType t, const char* p) {
  switch (t) {
    case ScalarType::kInt8:
      return load_le<std::int8_t>(p);
    case ScalarType::kUint8:
      return load_le<std::uint8_t>(p);
    case ScalarType::kInt16:
      return load_le<std::int16_t>(p);
    case ScalarType::kUint16:
      return load_le<std::uint16_t>(p);
    case ScalarType::kInt32:
      return load_le<std::int32_t>(p);
    case ScalarType::kUint32:
      return load_le<std::uint32_t>(p);
    case ScalarType::kFloat32:
      return load_le<float>(p);
    case ScalarType::kFloat64:
      return load_le<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  ScalarType type = ScalarType::kFloat32;
  bool is_list = false;
  ScalarType count_type = ScalarType::kUint8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

enum class Channel { kIgnore, kX, kY, kZ, kIntensity, kRed, kGreen, kBlue, kScanId };

Channel channel_of(const std::string& name) {
  if (name == "x") return Channel::kX;
  if (name == "y") return Channel::kY;
  if (name == "z") return Channel::kZ;
  if (name == "intensity") return Channel::kIntensity;
  if (name == "red" || name == "r") return Channel::kRed;
  if (name == "green" || name == "g") return Channel::kGreen;
  if (name == "blue" || name == "b") return Channel::kBlue;
  if (name == "scan_id") return Channel::kScanId;
  return Channel::kIgnore;
}

// Accumulates one vertex record.
struct VertexSink {
  PointCloud& cloud;
  bool want_intensity = false;
  bool want_rgb = false;
  bool want_scan = false;
  Vec3 p = Vec3::Zero();
  double intensity = 0.0;
  Rgb rgb;
  std::int32_t scan = -1;

  void set(Channel c, double v) {
    switch (c) {
      case Channel::kX:
        p.x() = v;
        break;
      case Channel::kY:
        p.y() = v;
        break;
      case Channel::kZ:
        p.z() = v;
        break;
      case Channel::kIntensity:
        intensity = v;
        break;
      case Channel::kRed:
        rgb.r = static_cast<std::uint8_t>(v);
        break;
      case Channel::kGreen:
        rgb.g = static_cast<std::uint8_t>(v);
        break;
      case Channel::kBlue:
        rgb.b = static_cast<std::uint8_t>(v);
        break;
      case Channel::kScanId:
        scan = static_cast<std::int32_t>(v);
        break;
      case Channel::kIgnore:
        break;
    }
  }
  void flush() {
    cloud.points.push_back(p);
    if (want_intensity) cloud.intensity.push_back(static_cast<float>(intensity));
    if (want_rgb) cloud.rgb.push_back(rgb);
    if (want_scan) cloud.scan_id.push_back(scan);
  }
};

class AsciiTokenizer {
 public:
  AsciiTokenizer(std::string_view data, std::size_t line) : data_(data), line_(line) {}

  std::string_view next() {
    while (pos_ < data_.size() && std::isspace(static_cast<unsigned char>(data_[pos_]))) {
      if (data_[pos_] == '\n') ++line_;
      ++pos_;
    }
    if (pos_ >= data_.size()) throw ParseError("PLY: unexpected end of data at line " + std::to_string(line_));
    const auto start = pos_;
    while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    return data_.substr(start, pos_ - start);
  }

  double next_number() {
    const auto tok = next();
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      throw ParseError("PLY: bad number '" + std::string(tok) + "' at line " + std::to_string(line_));
    }
    return v;
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

PointCloud read_ply(const std::string& buf) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string {
    if (pos >= buf.size()) throw ParseError("PLY: header not terminated by end_header");
    auto end = buf.find('\n', pos);
    if (end == std::string::npos) end = buf.size();
    std::string line = buf.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next_line() != "ply") throw UnsupportedFormat("PLY: missing magic");
  bool binary = false;
  std::vector<PlyElement> elements;
  for (;;) {
    const std::string line = next_line();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "end_header") break;
    if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        throw UnsupportedFormat("PLY: unsupported format '" + fmt + "'");
      }
    } else if (kw == "element") {
      PlyElement e;
      long long count = -1;
      ls >> e.name >> count;
      if (!ls || count < 0) throw ParseError("PLY: bad element line " + std::to_string(line_no));
      e.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (elements.empty()) throw ParseError("PLY: property before element at line " + std::to_string(line_no));
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        auto c = parse_scalar_type(ct);
        auto i = parse_scalar_type(it);
        if (!c || !i) throw ParseError("PLY: bad list property at line " + std::to_string(line_no));
        p.is_list = true;
        p.count_type = *c;
        p.type = *i;
      } else {
        auto t = parse_scalar_type(type);
        ls >> p.name;
        if (!t) throw ParseError("PLY: unknown property type '" + type + "' at line " + std::to_string(line_no));
        p.type = *t;
      }
      elements.back().properties.push_back(std::move(p));
    } else {
      throw ParseError("PLY: unexpected header keyword '" + kw + "' at line " + std::to_string(line_no));
    }
  }

  PointCloud cloud;
  AsciiTokenizer tok(std::string_view(buf).substr(std::min(pos, buf.size())), line_no + 1);
  std::size_t offset = pos;
  for (const auto& e : elements) {
    const bool is_vertex = e.name == "vertex";
    std::vector<Channel> channels;
    VertexSink sink{cloud, false, false, false, Vec3::Zero(), 0.0, Rgb{}, -1};
    for (const auto& p : e.properties) {
      const auto c = (is_vertex && !p.is_list) ? channel_of(p.name) : Channel::kIgnore;
      channels.push_back(c);
      sink.want_intensity |= c == Channel::kIntensity;
      sink.want_rgb |= c == Channel::kRed || c == Channel::kGreen || c == Channel::kBlue;
      sink.want_scan |= c == Channel::kScanId;
    }
    if (is_vertex) cloud.points.reserve(e.count);
    for (std::size_t r = 0; r < e.count; ++r) {
      sink.p.setZero();
      for (std::size_t k = 0; k < e.properties.size(); ++k) {
        const auto& p = e.properties[k];
        if (binary) {
          auto need = [&](std::size_t n) {
            if (offset + n > buf.size()) {
              throw ParseError("PLY: truncated binary payload at byte " + std::to_string(offset));
            }
          };
          if (p.is_list) {
            need(scalar_size(p.count_type));
            const auto n = static_cast<std::size_t>(load_scalar(p.count_type, buf.data() + offset));
            offset += scalar_size(p.count_type);
            need(n * scalar_size(p.type));
            offset += n * scalar_size(p.type);
          } else {
            need(scalar_size(p.type));
            sink.set(channels[k], load_scalar(p.type, buf.data() + offset));
            offset += scalar_size(p.type);
          }
        } else if (p.is_list) {
          const auto n = static_cast<std::size_t>(tok.next_number());
          for (std::size_t i = 0; i < n; ++i) tok.next();
        } else {
          sink.set(channels[k], tok.next_number());
        }
      }
      if (is_vertex) sink.flush();
    }
  }
  return cloud;
}

std::optional<double> to_double(std::string_view tok) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) return std::nullopt;
  return v;
}

PointCloud read_pcd(const std::string& buf) {
  std::istringstream in(buf);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> fields;
  std::vector<std::string> types;
  std::vector<int> counts;
  long long npoints = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    std::string v;
    if (kw == "FIELDS") {
      while (ls >> v) fields.push_back(v);
    } else if (kw == "TYPE") {
      while (ls >> v) types.push_back(v);
    } else if (kw == "COUNT") {
      int c = 0;
      while (ls >> c) counts.push_back(c);
    } else if (kw == "POINTS") {
      ls >> npoints;
    } else if (kw == "DATA") {
      ls >> v;
      if (v != "ascii") throw UnsupportedFormat("PCD: only ascii DATA is supported, got '" + v + "'");
      break;
    }
  }
  if (fields.empty() || npoints < 0) throw ParseError("PCD: incomplete header at line " + std::to_string(line_no));
  if (counts.empty()) counts.assign(fields.size(), 1);
  if (counts.size() != fields.size()) throw ParseError("PCD: COUNT/FIELDS length mismatch");

  PointCloud cloud;
  bool want_i = false, want_rgb = false, want_scan = false;
  for (const auto& f : fields) {
    want_i |= f == "intensity";
    want_rgb |= f == "rgb" || f == "rgba";
    want_scan |= f == "scan_id";
  }
  cloud.points.reserve(static_cast<std::size_t>(npoints));
  for (long long r = 0; r < npoints; ++r) {
    if (!std::getline(in, line)) throw ParseError("PCD: expected " + std::to_string(npoints) + " points, data ends at line " + std::to_string(line_no));
    ++line_no;
    std::istringstream ls(line);
    Vec3 p = Vec3::Zero();
    float intensity = 0.0f;
    Rgb rgb;
    std::int32_t scan = -1;
    for (std::size_t f = 0; f < fields.size(); ++f) {
      for (int c = 0; c < counts[f]; ++c) {
        std::string tok;
        if (!(ls >> tok)) throw ParseError("PCD: short record at line " + std::to_string(line_no));
        auto v = to_double(tok);
        if (!v) throw ParseError("PCD: bad number '" + tok + "' at line " + std::to_string(line_no));
        const auto& name = fields[f];
        if (name == "x") p.x() = *v;
        else if (name == "y") p.y() = *v;
        else if (name == "z") p.z() = *v;
        else if (name == "intensity") intensity = static_cast<float>(*v);
        else if (name == "scan_id") scan = static_cast<std::int32_t>(*v);
        else if (name == "rgb" || name == "rgba") {
          std::uint32_t packed = 0;
          const bool is_float = f < types.size() && types[f] == "F";
          if (is_float) {
            packed = std::bit_cast<std::uint32_t>(static_cast<float>(*v));
          } else {
            packed = static_cast<std::uint32_t>(*v);
          }
          rgb = Rgb{static_cast<std::uint8_t>((packed >> 16) & 0xff), static_cast<std::uint8_t>((packed >> 8) & 0xff),
                    static_cast<std::uint8_t>(packed & 0xff)};
        }
      }
    }
    cloud.points.push_back(p);
    if (want_i) cloud.intensity.push_back(intensity);
    if (want_rgb) cloud.rgb.push_back(rgb);
    if (want_scan) cloud.scan_id.push_back(scan);
  }
  return cloud;
}

template <typename T>
void put_le(std::string& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

void write_ply(const PointCloud& cloud, std::ostream& out, bool binary) {
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_intensity()) out << "property float intensity\n";
  if (cloud.has_rgb()) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (cloud.has_scan_id()) out << "property int scan_id\n";
  out << "end_header\n";
  if (binary) {
    std::string payload;
    payload.reserve(cloud.size() * 32);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      put_le(payload, cloud.points[i].x());
      put_le(payload, cloud.points[i].y());
      put_le(payload, cloud.points[i].z());
      if (cloud.has_intensity()) put_le(payload, cloud.intensity[i]);
      if (cloud.has_rgb()) {
        put_le(payload, cloud.rgb[i].r);
        put_le(payload, cloud.rgb[i].g);
        put_le(payload, cloud.rgb[i].b);
      }
      if (cloud.has_scan_id()) put_le(payload, cloud.scan_id[i]);
    }
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    return;
  }
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    if (cloud.has_intensity()) out << ' ' << std::setprecision(std::numeric_limits<float>::max_digits10) << cloud.intensity[i] << std::setprecision(std::numeric_limits<double>::max_digits10);
    if (cloud.has_rgb()) out << ' ' << int(cloud.rgb[i].r) << ' ' << int(cloud.rgb[i].g) << ' ' << int(cloud.rgb[i].b);
    if (cloud.has_scan_id()) out << ' ' << cloud.scan_id[i];
    out << '\n';
  }
}

void write_pcd(const PointCloud& cloud, std::ostream& out) {
  std::string fields = "x y z", sizes = "8 8 8", types = "F F F", counts = "1 1 1";
  if (cloud.has_intensity()) fields += " intensity", sizes += " 4", types += " F", counts += " 1";
  if (cloud.has_rgb()) fields += " rgb", sizes += " 4", types += " U", counts += " 1";
  if (cloud.has_scan_id()) fields += " scan_id", sizes += " 4", types += " I", counts += " 1";
  out << "# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\n";
  out << "FIELDS " << fields << "\nSIZE " << sizes << "\nTYPE " << types << "\nCOUNT " << counts << "\n";
  out << "WIDTH " << cloud.size() << "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS " << cloud.size() << "\nDATA ascii\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    if (cloud.has_intensity()) out << ' ' << std::setprecision(std::numeric_limits<float>::max_digits10) << cloud.intensity[i] << std::setprecision(std::numeric_limits<double>::max_digits10);
    if (cloud.has_rgb()) {
      const std::uint32_t packed = (std::uint32_t(cloud.rgb[i].r) << 16) | (std::uint32_t(cloud.rgb[i].g) << 8) | cloud.rgb[i].b;
      out << ' ' << packed;
    }
    if (cloud.has_scan_id()) out << ' ' << cloud.scan_id[i];
    out << '\n';
  }
}

}  // namespace

PointCloud read_cloud(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  PointCloud cloud;
  if (buf.rfind("ply", 0) == 0) {
    cloud = read_ply(buf);
  } else if (buf.find("FIELDS") != std::string::npos && buf.find("DATA") != std::string::npos) {
    cloud = read_pcd(buf);
  } else {
    throw UnsupportedFormat("unrecognized point cloud format: " + path.string());
  }
  return cloud;
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  cloud.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  switch (format) {
    case CloudFormat::kPlyAscii:
      write_ply(cloud, out, false);
      break;
    case CloudFormat::kPlyBinary:
      write_ply(cloud, out, true);
      break;
    case CloudFormat::kPcdAscii:
      write_pcd(cloud, out);
      break;
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_segments_ply(const std::vector<std::pair<Vec3, Vec3>>& segments,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << 2 * segments.size()
      << "\nproperty double x\nproperty double y\nproperty double z\n"
      << "element edge " << segments.size() << "\nproperty int vertex1\nproperty int vertex2\nend_header\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& [a, b] : segments) {
    out << a.x() << ' ' << a.y() << ' ' << a.z() << '\n' << b.x() << ' ' << b.y() << ' ' << b.z() << '\n';
  }
  for (std::size_t i = 0; i < segments.size(); ++i) out << 2 * i << ' ' << 2 * i + 1 << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace edgereg
