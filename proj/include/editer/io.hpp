#pragma once

// Files: the binary dataset container, scenario and config JSON, CSV reports,
// ROI strings and 8-bit image export.
//
// Dataset container (all integers little-endian):
//
//   offset  size  field
//        0     8  magic "EDITERDS"
//        8     4  u32 version (1)
//       12     4  u32 N_kx
//       16     4  u32 N_PE
//       20     4  u32 N_partitions
//       24     4  u32 N_c (detector count)
//       28     4  u32 flags, bit 0 = ground truth present
//       32    32  zero
//
// The payload follows directly: for each partition, the channels primary,
// detector 1..N_c, then ground truth if flagged; each channel is N_kx × N_PE
// samples in column-major order, one sample = two IEEE-754 binary64 (re, im).

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "editer/core.hpp"
#include "editer/kspace.hpp"
#include "editer/metrics.hpp"
#include "editer/sim.hpp"

namespace editer {

using Json = nlohmann::json;

inline constexpr char dataset_magic[8] = {'E', 'D', 'I', 'T', 'E', 'R', 'D', 'S'};
inline constexpr std::uint32_t dataset_version = 1;
inline constexpr std::size_t dataset_header_bytes = 64;
inline constexpr std::uint32_t flag_ground_truth = 1u;

struct DatasetHeader {
  std::uint32_t version = dataset_version;
  std::uint32_t readout_samples = 0;
  std::uint32_t pe_lines = 0;
  std::uint32_t partitions = 0;
  std::uint32_t detectors = 0;
  std::uint32_t flags = 0;

  bool has_ground_truth() const { return (flags & flag_ground_truth) != 0; }
  std::uint32_t channels_per_partition() const { return detectors + 1 + (has_ground_truth() ? 1 : 0); }
};

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::size_t at, std::uint32_t v)
{
  for (int b = 0; b < 4; ++b)
    out[at + static_cast<std::size_t>(b)] = static_cast<unsigned char>(v >> (8 * b));
}

inline std::uint32_t get_u32(const unsigned char* p)
{
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b)
    v |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return v;
}

inline void put_f64(unsigned char* p, double x)
{
  auto bits = std::bit_cast<std::uint64_t>(x);
  for (int b = 0; b < 8; ++b)
    p[b] = static_cast<unsigned char>(bits >> (8 * b));
}

inline double get_f64(const unsigned char* p)
{
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b)
    bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

inline std::uint32_t checked_u32(Index v, const char* what)
{
  if (v < 0 || static_cast<std::uint64_t>(v) > std::numeric_limits<std::uint32_t>::max())
    fail(ErrorKind::io, std::string("dimension overflow: ") + what + " = " + std::to_string(v) +
                            " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

// Bytes implied by the header, or nullopt if the product overflows.
inline std::optional<std::uint64_t> payload_bytes(const DatasetHeader& h)
{
  std::uint64_t n = 16;
  for (std::uint64_t f : {std::uint64_t{h.readout_samples}, std::uint64_t{h.pe_lines}, std::uint64_t{h.partitions},
                          std::uint64_t{h.channels_per_partition()}}) {
    if (f != 0 && n > std::numeric_limits<std::uint64_t>::max() / f)
      return std::nullopt;
    n *= f;
  }
  return n;
}

inline void append_matrix(std::vector<unsigned char>& out, const CMatrix& m)
{
  const std::size_t at = out.size();
  out.resize(at + static_cast<std::size_t>(m.size()) * 16);
  unsigned char* p = out.data() + at;
  for (Index i = 0; i < m.size(); ++i, p += 16) {
    put_f64(p, m.data()[i].real());
    put_f64(p + 8, m.data()[i].imag());
  }
}

inline CMatrix take_matrix(const unsigned char*& p, Index rows, Index cols)
{
  CMatrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i, p += 16)
    m.data()[i] = cplx(get_f64(p), get_f64(p + 8));
  return m;
}

} // namespace detail

inline std::vector<unsigned char> encode_volume(const VolumeDataset& vol)
{
  const auto report = validate_volume(vol);
  if (!report.valid())
    fail(ErrorKind::validation, "cannot write invalid volume: " + report.summary());
  const bool gt = vol.partitions.front().ground_truth.has_value();
  for (const auto& p : vol.partitions)
    if (p.ground_truth.has_value() != gt)
      fail(ErrorKind::validation, "cannot write volume: ground truth present in some partitions only");

  DatasetHeader h;
  h.readout_samples = detail::checked_u32(vol.readout_samples(), "N_kx");
  h.pe_lines = detail::checked_u32(vol.pe_lines(), "N_PE");
  h.partitions = detail::checked_u32(static_cast<Index>(vol.partitions.size()), "N_partitions");
  h.detectors = detail::checked_u32(vol.detector_count(), "N_c");
  h.flags = gt ? flag_ground_truth : 0u;
  const auto bytes = detail::payload_bytes(h);
  if (!bytes || *bytes > std::numeric_limits<std::size_t>::max() - dataset_header_bytes)
    fail(ErrorKind::io, "dimension overflow: payload size exceeds addressable memory");

  std::vector<unsigned char> out(dataset_header_bytes, 0);
  std::memcpy(out.data(), dataset_magic, 8);
  detail::put_u32(out, 8, h.version);
  detail::put_u32(out, 12, h.readout_samples);
  detail::put_u32(out, 16, h.pe_lines);
  detail::put_u32(out, 20, h.partitions);
  detail::put_u32(out, 24, h.detectors);
  detail::put_u32(out, 28, h.flags);
  out.reserve(dataset_header_bytes + static_cast<std::size_t>(*bytes));
  for (const auto& p : vol.partitions) {
    detail::append_matrix(out, p.primary);
    for (const auto& d : p.detectors)
      detail::append_matrix(out, d);
    if (gt)
      detail::append_matrix(out, *p.ground_truth);
  }
  return out;
}

inline DatasetHeader decode_header(const unsigned char* data, std::size_t size)
{
  if (size < dataset_header_bytes)
    fail(ErrorKind::io, "truncated header: expected " + std::to_string(dataset_header_bytes) + " bytes, got " +
                            std::to_string(size));
  if (std::memcmp(data, dataset_magic, 8) != 0)
    fail(ErrorKind::io, "magic mismatch: not an EDITERDS dataset");
  DatasetHeader h;
  h.version = detail::get_u32(data + 8);
  if (h.version != dataset_version)
    fail(ErrorKind::io, "unsupported version " + std::to_string(h.version) + " (expected " +
                            std::to_string(dataset_version) + ")");
  h.readout_samples = detail::get_u32(data + 12);
  h.pe_lines = detail::get_u32(data + 16);
  h.partitions = detail::get_u32(data + 20);
  h.detectors = detail::get_u32(data + 24);
  h.flags = detail::get_u32(data + 28);
  if ((h.flags & ~flag_ground_truth) != 0)
    fail(ErrorKind::io, "unknown flag bits " + std::to_string(h.flags & ~flag_ground_truth));
  return h;
}

inline VolumeDataset decode_volume(const std::vector<unsigned char>& bytes)
{
  const auto h = decode_header(bytes.data(), bytes.size());
  const auto expected = detail::payload_bytes(h);
  if (!expected || *expected > std::numeric_limits<std::size_t>::max() - dataset_header_bytes)
    fail(ErrorKind::io, "dimension overflow: header dims " + std::to_string(h.readout_samples) + "×" +
                            std::to_string(h.pe_lines) + "×" + std::to_string(h.partitions) + " with " +
                            std::to_string(h.channels_per_partition()) + " channels");
  const std::size_t got = bytes.size() - dataset_header_bytes;
  if (got < *expected)
    fail(ErrorKind::io, "truncated payload: expected " + std::to_string(*expected) + " bytes, got " +
                            std::to_string(got));
  if (got > *expected)
    fail(ErrorKind::io, "payload length mismatch: expected " + std::to_string(*expected) + " bytes, got " +
                            std::to_string(got));

  const Index rows = h.readout_samples;
  const Index cols = h.pe_lines;
  VolumeDataset vol;
  vol.partitions.resize(h.partitions);
  const unsigned char* p = bytes.data() + dataset_header_bytes;
  for (std::uint32_t part = 0; part < h.partitions; ++part) {
    auto& ds = vol.partitions[part];
    ds.primary = detail::take_matrix(p, rows, cols);
    for (std::uint32_t d = 0; d < h.detectors; ++d)
      ds.detectors.push_back(detail::take_matrix(p, rows, cols));
    if (h.has_ground_truth())
      ds.ground_truth = detail::take_matrix(p, rows, cols);
    if (h.partitions > 1)
      ds.partition_index = static_cast<int>(part);
  }
  return vol;
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorKind::io, "cannot open '" + path.string() + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad())
    fail(ErrorKind::io, "read error on '" + path.string() + "'");
  return bytes;
}

inline void write_bytes(const std::filesystem::path& path, std::string_view bytes)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    fail(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out)
    fail(ErrorKind::io, "write error on '" + path.string() + "'");
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes)
{
  write_bytes(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

inline DatasetHeader read_header(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorKind::io, "cannot open '" + path.string() + "' for reading");
  unsigned char buf[dataset_header_bytes] = {};
  in.read(reinterpret_cast<char*>(buf), dataset_header_bytes);
  return decode_header(buf, static_cast<std::size_t>(in.gcount()));
}

inline void write_volume(const VolumeDataset& vol, const std::filesystem::path& path)
{
  write_bytes(path, encode_volume(vol));
}

inline VolumeDataset read_volume(const std::filesystem::path& path) { return decode_volume(read_bytes(path)); }

inline void write_dataset(const AcquisitionDataset& ds, const std::filesystem::path& path)
{
  VolumeDataset vol;
  vol.partitions = {ds};
  write_volume(vol, path);
}

/// Single-partition files only.
inline AcquisitionDataset read_dataset(const std::filesystem::path& path)
{
  auto vol = read_volume(path);
  if (vol.partitions.size() != 1)
    fail(ErrorKind::io, "'" + path.string() + "' holds " + std::to_string(vol.partitions.size()) +
                            " partitions; read it as a volume");
  return std::move(vol.partitions.front());
}

// ---------------------------------------------------------------------------
// ROI strings

/// "r0:r1,c0:c1", inclusive and zero-based.
inline RoiSpec parse_roi(const std::string& text)
{
  auto bad = [&] { fail(ErrorKind::invalid_argument, "malformed roi '" + text + "' (expected r0:r1,c0:c1)"); };
  const auto comma = text.find(',');
  if (comma == std::string::npos)
    bad();
  auto range = [&](const std::string& part, Index& lo, Index& hi) {
    const auto colon = part.find(':');
    if (colon == std::string::npos)
      bad();
    std::size_t used = 0;
    try {
      const std::string a = part.substr(0, colon);
      const std::string b = part.substr(colon + 1);
      lo = std::stol(a, &used);
      if (used != a.size())
        bad();
      hi = std::stol(b, &used);
      if (used != b.size())
        bad();
    } catch (const std::logic_error&) {
      bad();
    }
    if (lo < 0 || hi < lo)
      bad();
  };
  RoiSpec roi;
  range(text.substr(0, comma), roi.row0, roi.row1);
  range(text.substr(comma + 1), roi.col0, roi.col1);
  return roi;
}

inline std::string format_roi(const RoiSpec& roi)
{
  return std::to_string(roi.row0) + ":" + std::to_string(roi.row1) + "," + std::to_string(roi.col0) + ":" +
         std::to_string(roi.col1);
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_field(std::string_view v)
{
  if (v.find_first_of(",\"\r\n") == std::string_view::npos)
    return std::string(v);
  std::string out = "\"";
  for (char c : v) {
    if (c == '"')
      out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_line(const std::vector<std::string>& fields)
{
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i)
      line += ',';
    line += csv_field(fields[i]);
  }
  line += "\r\n";
  return line;
}

/// Shortest decimal that reads back as the same double.
inline std::string format_double(double v) { return Json(v).dump(); }

// ---------------------------------------------------------------------------
// Image export

/// Min-max windowed 8-bit grayscale, row-major; a constant image maps to 0.
inline std::vector<std::uint8_t> to_gray8(const MagnitudeImage& img)
{
  std::vector<std::uint8_t> out(static_cast<std::size_t>(img.rows() * img.cols()), 0);
  if (img.pixels.size() == 0)
    return out;
  const double lo = img.pixels.minCoeff();
  const double hi = img.pixels.maxCoeff();
  if (!(hi > lo))
    return out;
  std::size_t k = 0;
  for (Index r = 0; r < img.rows(); ++r)
    for (Index c = 0; c < img.cols(); ++c)
      out[k++] = static_cast<std::uint8_t>(std::lround(255.0 * (img.pixels(r, c) - lo) / (hi - lo)));
  return out;
}

/// Binary PGM (P5, maxval 255): width = image columns (PE), height = rows (readout).
inline std::string encode_pgm(const MagnitudeImage& img)
{
  const auto gray = to_gray8(img);
  std::string out = "P5\n" + std::to_string(img.cols()) + " " + std::to_string(img.rows()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(gray.data()), gray.size());
  return out;
}

inline void write_pgm(const MagnitudeImage& img, const std::filesystem::path& path)
{
  write_bytes(path, encode_pgm(img));
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline void allow_keys(const Json& j, std::initializer_list<std::string_view> keys, const std::string& where)
{
  if (!j.is_object())
    fail(ErrorKind::validation, where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (auto key : keys)
      known = known || key == k;
    if (!known)
      fail(ErrorKind::validation, where + ": unknown key '" + k + "'");
  }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback, const std::string& where)
{
  if (!j.contains(key))
    return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    fail(ErrorKind::validation, where + ": field '" + key + "' has the wrong type");
  }
}

template <class T>
T get_req(const Json& j, const char* key, const std::string& where)
{
  if (!j.contains(key))
    fail(ErrorKind::validation, where + ": missing field '" + key + "'");
  return get_or<T>(j, key, T{}, where);
}

inline Json complex_json(cplx z) { return Json::array({z.real(), z.imag()}); }

inline cplx complex_from(const Json& j, const std::string& where)
{
  if (j.is_number())
    return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  fail(ErrorKind::validation, where + ": complex value must be a number or [re, im]");
}

template <class E>
struct EnumName {
  E value;
  const char* name;
};

inline constexpr EnumName<SourceKind> source_kinds[] = {
    {SourceKind::single_tone, "single_tone"}, {SourceKind::multi_tone, "multi_tone"}, {SourceKind::broadband, "broadband"}};
inline constexpr EnumName<LinePhase> line_phases[] = {{LinePhase::continuous, "continuous"}, {LinePhase::random, "random"}};
inline constexpr EnumName<ShapeKind> shape_kinds[] = {{ShapeKind::ellipse, "ellipse"}, {ShapeKind::rectangle, "rectangle"}};
inline constexpr EnumName<ClusterMethod> cluster_methods[] = {{ClusterMethod::threshold, "threshold"},
                                                              {ClusterMethod::kmeans, "kmeans"}};

template <class E, std::size_t N>
const char* enum_name(const EnumName<E> (&table)[N], E v)
{
  for (const auto& e : table)
    if (e.value == v)
      return e.name;
  return "?";
}

template <class E, std::size_t N>
E enum_from(const EnumName<E> (&table)[N], const std::string& s, const std::string& where)
{
  for (const auto& e : table)
    if (s == e.name)
      return e.value;
  std::string options;
  for (const auto& e : table)
    options += (options.empty() ? "" : "|") + std::string(e.name);
  fail(ErrorKind::validation, where + ": '" + s + "' is not one of " + options);
}

} // namespace detail

inline Json scenario_to_json(const EmiScenario& sc)
{
  using detail::complex_json;
  Json j;
  j["id"] = sc.id;
  j["readout_samples"] = sc.readout_samples;
  j["pe_lines"] = sc.pe_lines;
  j["detectors"] = sc.detectors;
  j["partitions"] = sc.partitions;
  j["seed"] = sc.seed;
  j["noise_sigma"] = sc.noise_sigma;
  j["decorrelate_signal"] = sc.decorrelate_signal;
  if (sc.roi)
    j["roi"] = format_roi(*sc.roi);

  j["phantom"] = Json::array();
  for (const auto& s : sc.phantom)
    j["phantom"].push_back({{"kind", detail::enum_name(detail::shape_kinds, s.kind)},
                            {"center_x", s.center_x},
                            {"center_y", s.center_y},
                            {"half_x", s.half_x},
                            {"half_y", s.half_y},
                            {"angle_deg", s.angle_deg},
                            {"intensity", s.intensity}});

  j["sources"] = Json::array();
  for (const auto& src : sc.sources) {
    Json s;
    s["name"] = src.name;
    s["kind"] = detail::enum_name(detail::source_kinds, src.kind);
    s["seed"] = src.seed;
    if (src.kind == SourceKind::broadband) {
      s["amplitude"] = src.amplitude;
      s["bandwidth"] = src.bandwidth;
      s["center"] = src.center;
      s["periodic"] = src.periodic;
      s["line_bin"] = src.line_bin;
    } else {
      s["tones"] = Json::array();
      for (const auto& t : src.tones)
        s["tones"].push_back({{"offset", t.offset}, {"amplitude", t.amplitude}, {"phase", t.phase}});
      s["line_phase"] = detail::enum_name(detail::line_phases, src.line_phase);
      s["line_period"] = src.line_period;
    }
    s["schedule"] = Json::array();
    for (const auto& iv : src.schedule.intervals)
      s["schedule"].push_back({{"start", iv.start}, {"end", iv.end}, {"on", iv.on}});
    j["sources"].push_back(s);
  }

  j["coupling"] = Json::array();
  for (const auto& k : sc.coupling.entries) {
    Json taps = Json::array();
    for (Index r = 0; r < k.taps.rows(); ++r) {
      Json row = Json::array();
      for (Index c = 0; c < k.taps.cols(); ++c)
        row.push_back(complex_json(k.taps(r, c)));
      taps.push_back(row);
    }
    j["coupling"].push_back({{"source", k.source}, {"channel", k.channel}, {"gain", complex_json(k.gain)}, {"taps", taps}});
  }
  return j;
}

inline EmiScenario scenario_from_json(const Json& j)
{
  using detail::get_or;
  using detail::get_req;
  const std::string top = "scenario";
  detail::allow_keys(j,
                     {"id", "readout_samples", "pe_lines", "detectors", "partitions", "seed", "noise_sigma",
                      "decorrelate_signal", "roi", "phantom", "sources", "coupling"},
                     top);
  EmiScenario sc;
  sc.id = get_or<std::string>(j, "id", "", top);
  sc.readout_samples = get_req<Index>(j, "readout_samples", top);
  sc.pe_lines = get_req<Index>(j, "pe_lines", top);
  sc.detectors = get_req<int>(j, "detectors", top);
  sc.partitions = get_or<int>(j, "partitions", 1, top);
  sc.seed = get_or<std::uint64_t>(j, "seed", 0, top);
  if (j.contains("noise_sigma") && j["noise_sigma"].is_number())
    sc.noise_sigma = {j["noise_sigma"].get<double>()};
  else
    sc.noise_sigma = get_or<std::vector<double>>(j, "noise_sigma", {}, top);
  sc.decorrelate_signal = get_or<bool>(j, "decorrelate_signal", false, top);
  if (j.contains("roi")) {
    try {
      sc.roi = parse_roi(get_req<std::string>(j, "roi", top));
    } catch (const Error& e) {
      fail(ErrorKind::validation, top + ": " + e.what());
    }
  }

  if (!j.contains("phantom") || !j["phantom"].is_array())
    fail(ErrorKind::validation, top + ": missing field 'phantom' (array of shapes)");
  for (std::size_t i = 0; i < j["phantom"].size(); ++i) {
    const auto& s = j["phantom"][i];
    const std::string where = "phantom[" + std::to_string(i) + "]";
    detail::allow_keys(s, {"kind", "center_x", "center_y", "half_x", "half_y", "angle_deg", "intensity"}, where);
    Shape sh;
    sh.kind = detail::enum_from(detail::shape_kinds, get_or<std::string>(s, "kind", "ellipse", where), where);
    sh.center_x = get_or<double>(s, "center_x", 0.0, where);
    sh.center_y = get_or<double>(s, "center_y", 0.0, where);
    sh.half_x = get_req<double>(s, "half_x", where);
    sh.half_y = get_req<double>(s, "half_y", where);
    sh.angle_deg = get_or<double>(s, "angle_deg", 0.0, where);
    sh.intensity = get_or<double>(s, "intensity", 1.0, where);
    sc.phantom.push_back(sh);
  }

  if (j.contains("sources")) {
    if (!j["sources"].is_array())
      fail(ErrorKind::validation, top + ": 'sources' must be an array");
    for (std::size_t i = 0; i < j["sources"].size(); ++i) {
      const auto& s = j["sources"][i];
      const std::string where = "sources[" + std::to_string(i) + "]";
      detail::allow_keys(s,
                         {"name", "kind", "seed", "amplitude", "bandwidth", "center", "periodic", "line_bin", "tones",
                          "line_phase", "line_period", "schedule"},
                         where);
      EmiSource src;
      src.name = get_or<std::string>(s, "name", "", where);
      src.kind = detail::enum_from(detail::source_kinds, get_req<std::string>(s, "kind", where), where);
      src.seed = get_or<std::uint64_t>(s, "seed", 0, where);
      src.amplitude = get_or<double>(s, "amplitude", 0.0, where);
      src.bandwidth = get_or<double>(s, "bandwidth", 1.0, where);
      src.center = get_or<double>(s, "center", 0.0, where);
      src.periodic = get_or<bool>(s, "periodic", false, where);
      src.line_bin = get_or<int>(s, "line_bin", 0, where);
      src.line_phase =
          detail::enum_from(detail::line_phases, get_or<std::string>(s, "line_phase", "continuous", where), where);
      src.line_period = get_or<double>(s, "line_period", 0.0, where);
      if (s.contains("tones")) {
        for (std::size_t t = 0; t < s["tones"].size(); ++t) {
          const auto& tj = s["tones"][t];
          const std::string tw = where + ".tones[" + std::to_string(t) + "]";
          detail::allow_keys(tj, {"offset", "amplitude", "phase"}, tw);
          src.tones.push_back(
              {get_req<double>(tj, "offset", tw), get_req<double>(tj, "amplitude", tw), get_or<double>(tj, "phase", 0.0, tw)});
        }
      }
      if (s.contains("schedule")) {
        for (std::size_t t = 0; t < s["schedule"].size(); ++t) {
          const auto& iv = s["schedule"][t];
          const std::string iw = where + ".schedule[" + std::to_string(t) + "]";
          detail::allow_keys(iv, {"start", "end", "on"}, iw);
          src.schedule.intervals.push_back(
              {get_req<Index>(iv, "start", iw), get_req<Index>(iv, "end", iw), get_or<bool>(iv, "on", true, iw)});
        }
      }
      sc.sources.push_back(src);
    }
  }

  if (j.contains("coupling")) {
    for (std::size_t i = 0; i < j["coupling"].size(); ++i) {
      const auto& c = j["coupling"][i];
      const std::string where = "coupling[" + std::to_string(i) + "]";
      detail::allow_keys(c, {"source", "channel", "gain", "taps"}, where);
      CouplingKernel k;
      k.source = get_req<int>(c, "source", where);
      k.channel = get_req<int>(c, "channel", where);
      k.gain = c.contains("gain") ? detail::complex_from(c["gain"], where + ".gain") : cplx(1.0, 0.0);
      if (c.contains("taps")) {
        const auto& t = c["taps"];
        if (!t.is_array() || t.empty() || !t[0].is_array() || t[0].empty())
          fail(ErrorKind::validation, where + ".taps: expected a non-empty array of rows (dky rows × dkx taps)");
        const Index rows = static_cast<Index>(t.size());
        const Index cols = static_cast<Index>(t[0].size());
        k.taps = CMatrix(rows, cols);
        for (Index r = 0; r < rows; ++r) {
          if (!t[r].is_array() || static_cast<Index>(t[r].size()) != cols)
            fail(ErrorKind::validation, where + ".taps: rows differ in length");
          for (Index q = 0; q < cols; ++q)
            k.taps(r, q) = detail::complex_from(t[r][q], where + ".taps");
        }
        k.support = {static_cast<int>(cols), static_cast<int>(rows)};
      }
      sc.coupling.entries.push_back(k);
    }
  }
  return sc;
}

inline Json parse_json_file(const std::filesystem::path& path)
{
  const auto bytes = read_bytes(path);
  try {
    return Json::parse(bytes.begin(), bytes.end());
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::validation, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline EmiScenario read_scenario(const std::filesystem::path& path)
{
  auto sc = scenario_from_json(parse_json_file(path));
  require_valid(sc);
  return sc;
}

inline void write_scenario(const EmiScenario& sc, const std::filesystem::path& path)
{
  write_bytes(path, scenario_to_json(sc).dump(2) + "\n");
}

inline Json config_to_json(const CorrectionConfig& cfg)
{
  Json j;
  j["dkx"] = cfg.dkx;
  j["dky"] = cfg.dky;
  j["first_pass_window"] = cfg.first_pass_window;
  j["cluster_threshold"] = cfg.cluster_threshold;
  j["rank_cutoff"] = cfg.rank_cutoff;
  j["max_groups"] = cfg.max_groups ? Json(*cfg.max_groups) : Json(nullptr);
  j["method"] = detail::enum_name(detail::cluster_methods, cfg.method);
  return j;
}

/// Fields absent from `j` keep the values already in `base`.
inline CorrectionConfig config_from_json(const Json& j, CorrectionConfig base = {})
{
  using detail::get_or;
  const std::string where = "config";
  detail::allow_keys(j, {"dkx", "dky", "first_pass_window", "cluster_threshold", "rank_cutoff", "max_groups", "method"},
                     where);
  base.dkx = get_or<int>(j, "dkx", base.dkx, where);
  base.dky = get_or<int>(j, "dky", base.dky, where);
  base.first_pass_window = get_or<int>(j, "first_pass_window", base.first_pass_window, where);
  base.cluster_threshold = get_or<double>(j, "cluster_threshold", base.cluster_threshold, where);
  base.rank_cutoff = get_or<double>(j, "rank_cutoff", base.rank_cutoff, where);
  if (j.contains("max_groups"))
    base.max_groups = j["max_groups"].is_null() ? std::nullopt : std::optional<int>(get_or<int>(j, "max_groups", 0, where));
  if (j.contains("method"))
    base.method = detail::enum_from(detail::cluster_methods, get_or<std::string>(j, "method", "", where), where);
  return base;
}

inline CorrectionConfig read_config(const std::filesystem::path& path)
{
  return config_from_json(parse_json_file(path));
}

} // namespace editer
