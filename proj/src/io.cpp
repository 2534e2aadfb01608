#include "dsm/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace dsm::io {

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& message)
    : std::runtime_error(line > 0 ? source + ":" + std::to_string(line) + ": " + message : source + ": " + message),
      source_(source),
      line_(line) {}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf.data(), ptr);
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Line reader that tracks numbers for error messages.
class Lines {
 public:
  Lines(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++number_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }
  std::string require(const std::string& what) {
    std::string line;
    if (!next(line)) fail("unexpected end of file, expected " + what);
    return line;
  }
  [[noreturn]] void fail(const std::string& message) const { throw ParseError(source_, number_, message); }
  const std::string& source() const { return source_; }
  std::size_t number() const { return number_; }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t number_ = 0;
};

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  if (b != e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

template <typename T>
T number(const Lines& lines, const std::string& s, const std::string& what) {
  T v{};
  if (!parse_number(s, v)) lines.fail("invalid " + what + " '" + s + "'");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) lines.fail("non-finite " + what + " '" + s + "'");
  }
  return v;
}

std::vector<ClassId> parse_id_list(const Lines& lines, const std::string& s) {
  std::vector<ClassId> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    for (const auto& tok : split_ws(item)) out.push_back(number<ClassId>(lines, tok, "class id"));
  }
  return out;
}

std::string id_list(const std::vector<ClassId>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) out += (i ? "," : "") + std::to_string(ids[i]);
  return out;
}

// "key=value" header fields following a fixed prefix.
class Header {
 public:
  Header(const Lines& lines, const std::vector<std::string>& tokens, std::size_t first) : lines_(lines) {
    for (std::size_t i = first; i < tokens.size(); ++i) {
      const auto eq = tokens[i].find('=');
      if (eq == std::string::npos) {
        if (last_.empty()) lines.fail("malformed header field '" + tokens[i] + "'");
        extra_[last_].push_back(tokens[i]);
        continue;
      }
      last_ = tokens[i].substr(0, eq);
      if (fields_.count(last_)) lines.fail("duplicate header field '" + last_ + "'");
      fields_[last_] = tokens[i].substr(eq + 1);
    }
  }

  const std::string& get(const std::string& key) const {
    auto it = fields_.find(key);
    if (it == fields_.end()) lines_.fail("header is missing '" + key + "='");
    return it->second;
  }
  template <typename T>
  T num(const std::string& key) const {
    return number<T>(lines_, get(key), key);
  }
  const std::vector<std::string>& extra(const std::string& key) const {
    static const std::vector<std::string> none;
    auto it = extra_.find(key);
    return it == extra_.end() ? none : it->second;
  }
  ClassRegistry registry() const {
    try {
      return ClassRegistry(num<int>("classes"), num<ClassId>("free"), parse_id_list(lines_, get("dynamic")));
    } catch (const std::invalid_argument& e) {
      lines_.fail(e.what());
    }
  }

 private:
  const Lines& lines_;
  std::map<std::string, std::string> fields_;
  std::map<std::string, std::vector<std::string>> extra_;
  std::string last_;
};

std::string registry_fields(const ClassRegistry& r) {
  return "classes=" + std::to_string(r.num_classes()) + " free=" + std::to_string(r.free_class()) +
         " dynamic=" + id_list(r.dynamic_classes());
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw ParseError(path.string(), 0, "cannot open for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

// Little-endian primitives for the binary scan format.
template <typename T>
void put(std::ostream& out, T v) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& source) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw ParseError(source, 0, "truncated binary scan");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

constexpr char kBinaryMagic[] = "DSMB1";

TrainingFrame read_scan_binary(std::istream& in, const std::string& source) {
  TrainingFrame f;
  f.time_index = get<std::int64_t>(in, source);
  for (int a = 0; a < 3; ++a) f.sensor_origin[a] = get<float>(in, source);
  const auto n = get<std::uint64_t>(in, source);
  if (n > (std::uint64_t{1} << 32)) throw ParseError(source, 0, "implausible point count " + std::to_string(n));
  f.points.resize(static_cast<std::size_t>(n));
  for (auto& p : f.points) {
    for (int a = 0; a < 3; ++a) p.position[a] = get<float>(in, source);
    p.label = get<std::uint16_t>(in, source);
    for (int a = 0; a < 3; ++a) p.flow[a] = get<float>(in, source);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError(source, 0, "trailing bytes after binary scan");
  return f;
}

}  // namespace

void write_scan(std::ostream& out, const TrainingFrame& frame) {
  const auto& o = frame.sensor_origin;
  out << "dsm-scan v1 t=" << frame.time_index << " origin=" << format_double(o.x()) << ' ' << format_double(o.y())
      << ' ' << format_double(o.z()) << " n=" << frame.points.size() << '\n';
  for (const auto& p : frame.points) {
    out << format_double(p.position.x()) << ' ' << format_double(p.position.y()) << ' '
        << format_double(p.position.z()) << ' ' << p.label << ' ' << format_double(p.flow.x()) << ' '
        << format_double(p.flow.y()) << ' ' << format_double(p.flow.z()) << '\n';
  }
}

void write_scan_binary(std::ostream& out, const TrainingFrame& frame) {
  out.write(kBinaryMagic, 5);
  put<std::int64_t>(out, frame.time_index);
  for (int a = 0; a < 3; ++a) put<float>(out, static_cast<float>(frame.sensor_origin[a]));
  put<std::uint64_t>(out, frame.points.size());
  for (const auto& p : frame.points) {
    if (p.label < 0 || p.label > 0xffff) throw std::invalid_argument("label does not fit the binary scan format");
    for (int a = 0; a < 3; ++a) put<float>(out, static_cast<float>(p.position[a]));
    put<std::uint16_t>(out, static_cast<std::uint16_t>(p.label));
    for (int a = 0; a < 3; ++a) put<float>(out, static_cast<float>(p.flow[a]));
  }
}

TrainingFrame read_scan(std::istream& in, const std::string& source) {
  char magic[5] = {};
  in.read(magic, 5);
  if (in.gcount() == 5 && std::memcmp(magic, kBinaryMagic, 5) == 0) return read_scan_binary(in, source);
  in.clear();
  in.seekg(0);
  if (!in) throw ParseError(source, 0, "scan stream is not seekable");

  Lines lines(in, source);
  const auto tok = split_ws(lines.require("a dsm-scan header"));
  if (tok.size() < 2 || tok[0] != "dsm-scan" || tok[1] != "v1") lines.fail("not a dsm-scan v1 file");
  const Header h(lines, tok, 2);
  TrainingFrame f;
  f.time_index = h.num<TimeIndex>("t");
  const auto& rest = h.extra("origin");
  if (rest.size() != 2) lines.fail("origin needs three coordinates");
  f.sensor_origin = Vec3(h.num<double>("origin"), number<double>(lines, rest[0], "origin y"),
                         number<double>(lines, rest[1], "origin z"));
  const auto n = h.num<std::size_t>("n");
  f.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = split_ws(lines.require("point " + std::to_string(i)));
    if (t.size() != 7) lines.fail("expected 'x y z label ux uy uz', got " + std::to_string(t.size()) + " fields");
    PointSample p;
    p.position = Vec3(number<double>(lines, t[0], "x"), number<double>(lines, t[1], "y"),
                      number<double>(lines, t[2], "z"));
    p.label = number<ClassId>(lines, t[3], "label");
    p.flow = Vec3(number<double>(lines, t[4], "ux"), number<double>(lines, t[5], "uy"),
                  number<double>(lines, t[6], "uz"));
    f.points.push_back(p);
  }
  std::string extra;
  while (lines.next(extra)) {
    if (!trim(extra).empty()) lines.fail("more points than the header's n=" + std::to_string(n));
  }
  return f;
}

void save_scan(const std::filesystem::path& path, const TrainingFrame& frame, bool binary) {
  auto out = open_out(path, binary ? std::ios::out | std::ios::binary : std::ios::out);
  if (binary) {
    write_scan_binary(out, frame);
  } else {
    write_scan(out, frame);
  }
  finish_write(out, path);
}

TrainingFrame load_scan(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  return read_scan(in, path.string());
}

void write_map(std::ostream& out, const SemanticMap& map) {
  const auto& c = map.config();
  out << "dsm-map v1 resolution=" << format_double(c.resolution) << ' ' << registry_fields(map.registry())
      << " time=" << map.current_time() << " prior_alpha=" << format_double(c.prior_alpha)
      << " filter_lambda=" << format_double(c.filter_lambda) << " flow_floor=" << format_double(c.flow_floor)
      << " free_sample_interval=" << format_double(c.free_sample_interval)
      << " l_s=" << format_double(c.kernel.l_s) << " sigma_s=" << format_double(c.kernel.sigma_s)
      << " l1=" << format_double(c.kernel.l1) << " sigma1=" << format_double(c.kernel.sigma1)
      << " l_free=" << format_double(c.kernel.l_free) << " sigma_free=" << format_double(c.kernel.sigma_free)
      << " n=" << map.size() << '\n';
  for (const auto& key : map.sorted_keys()) {
    const VoxelState& s = *map.find(key);
    out << key.ix << ' ' << key.iy << ' ' << key.iz;
    for (Eigen::Index k = 0; k < s.alpha.size(); ++k) out << ' ' << format_double(s.alpha[k]);
    for (Eigen::Index k = 0; k < s.voxel_flow.size(); ++k) out << ' ' << format_double(s.voxel_flow[k]);
    out << '\n';
  }
}

SemanticMap read_map(std::istream& in, const std::string& source) {
  Lines lines(in, source);
  const auto tok = split_ws(lines.require("a dsm-map header"));
  if (tok.size() < 2 || tok[0] != "dsm-map" || tok[1] != "v1") lines.fail("not a dsm-map v1 file");
  const Header h(lines, tok, 2);
  MapConfig c;
  c.resolution = h.num<double>("resolution");
  c.prior_alpha = h.num<double>("prior_alpha");
  c.filter_lambda = h.num<double>("filter_lambda");
  c.flow_floor = h.num<double>("flow_floor");
  c.free_sample_interval = h.num<double>("free_sample_interval");
  c.kernel.l_s = h.num<double>("l_s");
  c.kernel.sigma_s = h.num<double>("sigma_s");
  c.kernel.l1 = h.num<double>("l1");
  c.kernel.sigma1 = h.num<double>("sigma1");
  c.kernel.l_free = h.num<double>("l_free");
  c.kernel.sigma_free = h.num<double>("sigma_free");
  const ClassRegistry registry = h.registry();
  std::optional<SemanticMap> map;
  try {
    map.emplace(c, registry);
  } catch (const std::invalid_argument& e) {
    lines.fail(e.what());
  }
  map->set_current_time(h.num<TimeIndex>("time"));
  const auto n = h.num<std::size_t>("n");
  const int K = registry.num_classes();
  const auto width = static_cast<std::size_t>(3 + 2 * K);
  std::optional<VoxelKey> previous;
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = split_ws(lines.require("voxel " + std::to_string(i)));
    if (t.size() != width) {
      lines.fail("expected " + std::to_string(width) + " fields per voxel, got " + std::to_string(t.size()));
    }
    const VoxelKey key{number<std::int32_t>(lines, t[0], "ix"), number<std::int32_t>(lines, t[1], "iy"),
                       number<std::int32_t>(lines, t[2], "iz")};
    if (previous && !(*previous < key)) lines.fail("voxel keys must be strictly increasing");
    previous = key;
    VoxelState s = VoxelState::fresh(K, c.prior_alpha);
    for (int k = 0; k < K; ++k) {
      s.alpha[k] = number<double>(lines, t[static_cast<std::size_t>(3 + k)], "alpha");
      s.voxel_flow[k] = number<double>(lines, t[static_cast<std::size_t>(3 + K + k)], "voxel flow");
    }
    if (!s.valid()) lines.fail("voxel state violates alpha > 0 / flow >= 0");
    map->insert(key, std::move(s));
  }
  std::string extra;
  while (lines.next(extra)) {
    if (!trim(extra).empty()) lines.fail("more voxels than the header's n=" + std::to_string(n));
  }
  return std::move(*map);
}

void save_map(const std::filesystem::path& path, const SemanticMap& map) {
  auto out = open_out(path);
  write_map(out, map);
  finish_write(out, path);
}

SemanticMap load_map(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_map(in, path.string());
}

void write_registry(std::ostream& out, const ClassRegistry& registry) {
  out << "dsm-registry v1 " << registry_fields(registry) << '\n';
}

ClassRegistry read_registry(std::istream& in, const std::string& source) {
  Lines lines(in, source);
  const auto tok = split_ws(lines.require("a dsm-registry header"));
  if (tok.size() < 2 || tok[0] != "dsm-registry" || tok[1] != "v1") lines.fail("not a dsm-registry v1 file");
  return Header(lines, tok, 2).registry();
}

void write_ground_truth(std::ostream& out, const GroundTruthModel& gt, const ClassRegistry& registry) {
  if (gt.mode == GroundTruthMode::point_set) {
    out << "dsm-gt v1 mode=points t=" << gt.time_index << ' ' << registry_fields(registry) << " n=" << gt.size()
        << '\n';
    for (const auto& p : gt.points) {
      out << format_double(p.position.x()) << ' ' << format_double(p.position.y()) << ' '
          << format_double(p.position.z()) << ' ' << p.label << '\n';
    }
  } else {
    out << "dsm-gt v1 mode=voxels t=" << gt.time_index << " resolution=" << format_double(gt.resolution) << ' '
        << registry_fields(registry) << " n=" << gt.size() << '\n';
    for (const auto& v : gt.voxels) out << v.key.ix << ' ' << v.key.iy << ' ' << v.key.iz << ' ' << v.label << '\n';
  }
}

GroundTruthModel read_ground_truth(std::istream& in, const std::string& source, ClassRegistry* registry) {
  Lines lines(in, source);
  const auto tok = split_ws(lines.require("a dsm-gt header"));
  if (tok.size() < 2 || tok[0] != "dsm-gt" || tok[1] != "v1") lines.fail("not a dsm-gt v1 file");
  const Header h(lines, tok, 2);
  const ClassRegistry reg = h.registry();
  const auto t = h.num<TimeIndex>("t");
  const auto n = h.num<std::size_t>("n");
  const std::string& mode = h.get("mode");
  auto check_label = [&](ClassId c) {
    if (!reg.is_valid(c)) lines.fail("label " + std::to_string(c) + " outside the class registry");
    return c;
  };
  GroundTruthModel gt;
  if (mode == "points") {
    std::vector<LabeledPoint> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto f = split_ws(lines.require("point " + std::to_string(i)));
      if (f.size() != 4) lines.fail("expected 'x y z label'");
      pts.push_back({Vec3(number<double>(lines, f[0], "x"), number<double>(lines, f[1], "y"),
                          number<double>(lines, f[2], "z")),
                     check_label(number<ClassId>(lines, f[3], "label"))});
    }
    gt = GroundTruthModel::point_set(t, std::move(pts));
  } else if (mode == "voxels") {
    const double res = h.num<double>("resolution");
    if (!(res > 0)) lines.fail("resolution must be positive");
    std::vector<LabeledVoxel> vox;
    vox.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto f = split_ws(lines.require("voxel " + std::to_string(i)));
      if (f.size() != 4) lines.fail("expected 'ix iy iz label'");
      vox.push_back({{number<std::int32_t>(lines, f[0], "ix"), number<std::int32_t>(lines, f[1], "iy"),
                      number<std::int32_t>(lines, f[2], "iz")},
                     check_label(number<ClassId>(lines, f[3], "label"))});
    }
    gt = GroundTruthModel::voxel_grid(t, res, std::move(vox));
  } else {
    lines.fail("unknown ground truth mode '" + mode + "'");
  }
  std::string extra;
  while (lines.next(extra)) {
    if (!trim(extra).empty()) lines.fail("more elements than the header's n=" + std::to_string(n));
  }
  if (registry) *registry = reg;
  return gt;
}

void save_ground_truth(const std::filesystem::path& path, const GroundTruthModel& gt, const ClassRegistry& registry) {
  auto out = open_out(path);
  write_ground_truth(out, gt, registry);
  finish_write(out, path);
}

GroundTruthModel load_ground_truth(const std::filesystem::path& path, ClassRegistry* registry) {
  auto in = open_in(path);
  return read_ground_truth(in, path.string(), registry);
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  out << "class,tp,fp,fn,precision,recall,iou\n";
  for (std::size_t k = 0; k < report.classes.size(); ++k) {
    const auto& m = report.classes[k];
    out << k << ',' << m.tp << ',' << m.fp << ',' << m.fn << ',' << opt(m.precision) << ',' << opt(m.recall) << ','
        << opt(m.iou) << '\n';
  }
  out << "__mean__,,,,,," << opt(report.miou) << '\n';
}

namespace {

struct Entry {
  std::string value;
  std::size_t line;
};

struct Section {
  std::string name;
  std::size_t line;
  std::vector<std::pair<std::string, Entry>> entries;

  const Entry* find(const std::string& key) const {
    const Entry* hit = nullptr;
    for (const auto& [k, e] : entries) {
      if (k == key) hit = &e;
    }
    return hit;
  }
};

std::vector<Section> read_ini(Lines& lines) {
  std::vector<Section> sections{{"", 0, {}}};
  std::string raw;
  while (lines.next(raw)) {
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) lines.fail("malformed section header");
      sections.push_back({trim(line.substr(1, line.size() - 2)), lines.number(), {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) lines.fail("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) lines.fail("empty key");
    sections.back().entries.push_back({key, {trim(line.substr(eq + 1)), lines.number()}});
  }
  return sections;
}

template <typename T>
T ini_number(const std::string& source, const Entry& e, const std::string& key) {
  T v{};
  if (!parse_number(e.value, v)) throw ParseError(source, e.line, "invalid value for '" + key + "': '" + e.value + "'");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) throw ParseError(source, e.line, "non-finite value for '" + key + "'");
  }
  return v;
}

std::vector<double> ini_numbers(const std::string& source, const Entry& e, const std::string& key,
                                std::size_t count) {
  const auto tok = split_ws(e.value);
  if (tok.size() != count) {
    throw ParseError(source, e.line, "'" + key + "' needs " + std::to_string(count) + " numbers");
  }
  std::vector<double> out;
  for (const auto& t : tok) out.push_back(ini_number<double>(source, {t, e.line}, key));
  return out;
}

// Rejects unknown and duplicated keys within a section.
void check_keys(const std::string& source, const Section& s, const std::vector<std::string>& allowed,
                const std::vector<std::string>& repeatable = {}) {
  std::vector<std::string> seen;
  for (const auto& [k, e] : s.entries) {
    const bool rep = std::find(repeatable.begin(), repeatable.end(), k) != repeatable.end();
    if (!rep && std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ParseError(source, e.line, "unknown key '" + k + "' in section [" + s.name + "]");
    }
    if (!rep && std::find(seen.begin(), seen.end(), k) != seen.end()) {
      throw ParseError(source, e.line, "duplicate key '" + k + "'");
    }
    seen.push_back(k);
  }
}

std::optional<ClassRegistry> registry_from(const std::string& source, const Section& s) {
  const Entry* count = s.find("classes");
  const Entry* free = s.find("free");
  const Entry* dyn = s.find("dynamic");
  if (!count && !free && !dyn) return std::nullopt;
  if (!count || !free) {
    throw ParseError(source, s.line, "section [" + s.name + "] needs both 'classes' and 'free'");
  }
  const std::size_t line = dyn ? dyn->line : count->line;
  try {
    std::vector<ClassId> ids;
    if (dyn) {
      for (auto tok : split_ws(std::string(dyn->value))) {
        std::replace(tok.begin(), tok.end(), ',', ' ');
        for (const auto& t : split_ws(tok)) ids.push_back(ini_number<ClassId>(source, {t, dyn->line}, "dynamic"));
      }
    }
    return ClassRegistry(ini_number<int>(source, *count, "classes"), ini_number<ClassId>(source, *free, "free"),
                         std::move(ids));
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, line, e.what());
  }
}

}  // namespace

ConfigFile read_config(std::istream& in, const std::string& source) {
  Lines lines(in, source);
  const auto sections = read_ini(lines);
  ConfigFile out;
  std::optional<Section> map_sec, kernel_sec, class_sec;
  for (const auto& s : sections) {
    if (s.name.empty()) {
      if (!s.entries.empty()) {
        throw ParseError(source, s.entries.front().second.line, "key outside of a section");
      }
    } else if (s.name == "map") {
      map_sec = s;
    } else if (s.name == "kernel") {
      kernel_sec = s;
    } else if (s.name == "classes") {
      class_sec = s;
    } else {
      throw ParseError(source, s.line, "unknown section [" + s.name + "]");
    }
  }

  MapConfig& c = out.config;
  if (map_sec) {
    check_keys(source, *map_sec,
               {"profile", "scale_to", "resolution", "prior_alpha", "filter_lambda", "flow_floor",
                "free_sample_interval"});
    if (const Entry* p = map_sec->find("profile")) {
      if (p->value == "ablation") {
        c = MapConfig::ablation();
      } else if (p->value == "outdoor") {
        c = MapConfig::outdoor();
      } else {
        throw ParseError(source, p->line, "unknown profile '" + p->value + "' (expected ablation or outdoor)");
      }
    }
    if (const Entry* e = map_sec->find("scale_to")) {
      const double r = ini_number<double>(source, *e, "scale_to");
      if (!(r > 0)) throw ParseError(source, e->line, "scale_to must be positive");
      c = c.scaled_to(r);
    }
    auto set = [&](const char* key, double& field) {
      if (const Entry* e = map_sec->find(key)) field = ini_number<double>(source, *e, key);
    };
    set("resolution", c.resolution);
    set("prior_alpha", c.prior_alpha);
    set("filter_lambda", c.filter_lambda);
    set("flow_floor", c.flow_floor);
    set("free_sample_interval", c.free_sample_interval);
  }
  if (kernel_sec) {
    check_keys(source, *kernel_sec, {"l_s", "sigma_s", "l1", "sigma1", "l_free", "sigma_free"});
    auto set = [&](const char* key, double& field) {
      if (const Entry* e = kernel_sec->find(key)) field = ini_number<double>(source, *e, key);
    };
    set("l_s", c.kernel.l_s);
    set("sigma_s", c.kernel.sigma_s);
    set("l1", c.kernel.l1);
    set("sigma1", c.kernel.sigma1);
    set("l_free", c.kernel.l_free);
    set("sigma_free", c.kernel.sigma_free);
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, 0, e.what());
  }
  if (class_sec) {
    check_keys(source, *class_sec, {"classes", "free", "dynamic"});
    out.registry = registry_from(source, *class_sec);
  }
  return out;
}

ConfigFile load_config(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_config(in, path.string());
}

void write_config(std::ostream& out, const MapConfig& c, const std::optional<ClassRegistry>& registry) {
  out << "[map]\n"
      << "resolution = " << format_double(c.resolution) << '\n'
      << "prior_alpha = " << format_double(c.prior_alpha) << '\n'
      << "filter_lambda = " << format_double(c.filter_lambda) << '\n'
      << "flow_floor = " << format_double(c.flow_floor) << '\n'
      << "free_sample_interval = " << format_double(c.free_sample_interval) << "\n\n"
      << "[kernel]\n"
      << "l_s = " << format_double(c.kernel.l_s) << '\n'
      << "sigma_s = " << format_double(c.kernel.sigma_s) << '\n'
      << "l1 = " << format_double(c.kernel.l1) << '\n'
      << "sigma1 = " << format_double(c.kernel.sigma1) << '\n'
      << "l_free = " << format_double(c.kernel.l_free) << '\n'
      << "sigma_free = " << format_double(c.kernel.sigma_free) << '\n';
  if (registry) {
    out << "\n[classes]\n"
        << "classes = " << registry->num_classes() << '\n'
        << "free = " << registry->free_class() << '\n'
        << "dynamic = " << id_list(registry->dynamic_classes()) << '\n';
  }
}

WorldSpec read_world(std::istream& in, const std::string& source) {
  Lines lines(in, source);
  const auto sections = read_ini(lines);
  constexpr double deg = std::numbers::pi / 180.0;
  WorldSpec w;
  bool have_world = false;
  bool have_sensor = false;
  std::vector<std::pair<const Section*, std::size_t>> dynamic_sections;

  auto waypoint = [&](const Entry& e) {
    const auto v = ini_numbers(source, e, "waypoint", 4);
    if (v[0] != std::floor(v[0])) throw ParseError(source, e.line, "waypoint time must be an integer");
    return Waypoint{static_cast<TimeIndex>(v[0]), Vec3(v[1], v[2], v[3])};
  };
  auto check_times = [&](const std::vector<Waypoint>& path, const Section& s) {
    for (std::size_t i = 1; i < path.size(); ++i) {
      if (path[i].t <= path[i - 1].t) throw ParseError(source, s.line, "waypoint times must increase");
    }
  };

  for (const auto& s : sections) {
    if (s.name.empty()) {
      if (!s.entries.empty()) throw ParseError(source, s.entries.front().second.line, "key outside of a section");
    } else if (s.name == "world") {
      if (have_world) throw ParseError(source, s.line, "duplicate [world] section");
      have_world = true;
      check_keys(source, s,
                 {"classes", "free", "dynamic", "scans", "p_flip", "sigma_u", "gt_free_interval", "gt_resolution",
                  "samples_per_voxel_axis"});
      auto reg = registry_from(source, s);
      if (!reg) throw ParseError(source, s.line, "[world] needs 'classes', 'free' and 'dynamic'");
      w.registry = *reg;
      if (const Entry* e = s.find("scans")) w.num_scans = ini_number<int>(source, *e, "scans");
      if (const Entry* e = s.find("p_flip")) w.p_flip = ini_number<double>(source, *e, "p_flip");
      if (const Entry* e = s.find("sigma_u")) w.sigma_u = ini_number<double>(source, *e, "sigma_u");
      if (const Entry* e = s.find("gt_free_interval")) {
        w.free_sample_interval = ini_number<double>(source, *e, "gt_free_interval");
      }
      if (const Entry* e = s.find("gt_resolution")) w.gt_resolution = ini_number<double>(source, *e, "gt_resolution");
      if (const Entry* e = s.find("samples_per_voxel_axis")) {
        w.samples_per_voxel_axis = ini_number<int>(source, *e, "samples_per_voxel_axis");
      }
    } else if (s.name == "sensor") {
      if (have_sensor) throw ParseError(source, s.line, "duplicate [sensor] section");
      have_sensor = true;
      check_keys(source, s, {"azimuth", "elevation", "max_range"}, {"waypoint"});
      for (const auto& [k, e] : s.entries) {
        if (k == "waypoint") w.sensor.trajectory.push_back(waypoint(e));
      }
      check_times(w.sensor.trajectory, s);
      if (const Entry* e = s.find("azimuth")) {
        const auto v = ini_numbers(source, *e, "azimuth", 3);
        w.sensor.azimuth_min = v[0] * deg;
        w.sensor.azimuth_max = v[1] * deg;
        if (v[2] != std::floor(v[2])) throw ParseError(source, e->line, "azimuth count must be an integer");
        w.sensor.azimuth_count = static_cast<int>(v[2]);
      }
      if (const Entry* e = s.find("elevation")) {
        const auto v = ini_numbers(source, *e, "elevation", 3);
        w.sensor.elevation_min = v[0] * deg;
        w.sensor.elevation_max = v[1] * deg;
        if (v[2] != std::floor(v[2])) throw ParseError(source, e->line, "elevation count must be an integer");
        w.sensor.elevation_count = static_cast<int>(v[2]);
      }
      if (const Entry* e = s.find("max_range")) w.sensor.max_range = ini_number<double>(source, *e, "max_range");
    } else if (s.name == "static") {
      check_keys(source, s, {}, {"box"});
      for (const auto& [k, e] : s.entries) {
        const auto v = ini_numbers(source, e, "box", 7);
        if (v[6] != std::floor(v[6])) throw ParseError(source, e.line, "box label must be an integer");
        w.static_bodies.push_back({Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5]), static_cast<ClassId>(v[6])});
      }
    } else if (s.name == "dynamic") {
      check_keys(source, s, {"size", "label"}, {"waypoint"});
      DynamicBody d;
      const Entry* size = s.find("size");
      const Entry* label = s.find("label");
      if (!size || !label) throw ParseError(source, s.line, "[dynamic] needs 'size' and 'label'");
      const auto v = ini_numbers(source, *size, "size", 3);
      d.size = Vec3(v[0], v[1], v[2]);
      d.label = ini_number<ClassId>(source, *label, "label");
      for (const auto& [k, e] : s.entries) {
        if (k == "waypoint") d.trajectory.push_back(waypoint(e));
      }
      check_times(d.trajectory, s);
      w.dynamic_bodies.push_back(std::move(d));
      dynamic_sections.push_back({&s, w.dynamic_bodies.size() - 1});
    } else {
      throw ParseError(source, s.line, "unknown section [" + s.name + "]");
    }
  }
  if (!have_world) throw ParseError(source, 0, "missing [world] section");
  if (!have_sensor) throw ParseError(source, 0, "missing [sensor] section");

  // Point body errors at the section that declared the body.
  for (const auto& [sec, i] : dynamic_sections) {
    const auto& d = w.dynamic_bodies[i];
    if (!w.registry.is_dynamic(d.label)) {
      throw ParseError(source, sec->line, "dynamic body label " + std::to_string(d.label) + " is not a dynamic class");
    }
  }
  try {
    w.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, 0, e.what());
  }
  return w;
}

WorldSpec load_world(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_world(in, path.string());
}

}  // namespace dsm::io
