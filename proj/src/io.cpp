#include "reid/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace reid {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian and loaded by direct copy");

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof()) throw IoError(path.string() + ": read failed");
  return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out.good()) throw IoError(path.string() + ": write failed");
}

std::uint32_t read_u32(const std::string& bytes, std::size_t offset) {
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + offset, 4);
  return v;
}

void append_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

/// Shared loader for the two binary formats: checks magic, reads the header
/// with read_header, then maps the float32 payload into `values`.
template <class ReadHeader>
void load_f32_payload(const std::filesystem::path& path, const char* magic,
                      ReadHeader&& read_header, Matf& values) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 4 || bytes.compare(0, 4, magic) != 0)
    throw IoError(path.string() + ": bad magic at byte offset 0, expected \"" +
                  magic + "\"");
  const std::size_t header_end = read_header(bytes);

  const auto rows = static_cast<std::uint64_t>(values.rows());
  const auto cols = static_cast<std::uint64_t>(values.cols());
  const std::uint64_t expected = header_end + rows * cols * 4;
  if (bytes.size() < expected)
    throw IoError(path.string() + ": truncated payload, file ends at byte offset " +
                  std::to_string(bytes.size()) + " but needs " + std::to_string(expected));
  if (bytes.size() > expected)
    throw IoError(path.string() + ": trailing data at byte offset " +
                  std::to_string(expected));
  if (rows * cols > 0)
    std::memcpy(values.data(), bytes.data() + header_end, rows * cols * 4);
  const float* p = values.data();
  for (std::uint64_t k = 0; k < rows * cols; ++k)
    if (!std::isfinite(p[k]))
      throw IoError(path.string() + ": non-finite value at byte offset " +
                    std::to_string(header_end + 4 * k));
}

[[noreturn]] void csv_fail(const std::filesystem::path& path, std::size_t line,
                           const std::string& what) {
  throw SchemaError(path.string() + " line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

/// Splits into lines on LF, requiring a trailing LF on the last line and
/// rejecting CR bytes so files are canonical.
std::vector<std::string> split_lines(const std::filesystem::path& path,
                                     const std::string& bytes) {
  if (bytes.find('\r') != std::string::npos)
    throw SchemaError(path.string() + ": CR byte found, files must use LF line endings");
  if (!bytes.empty() && bytes.back() != '\n')
    throw SchemaError(path.string() + ": missing trailing newline");
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < bytes.size()) {
    const std::size_t nl = bytes.find('\n', start);
    lines.push_back(bytes.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

int parse_int(const std::filesystem::path& path, std::size_t line,
              const std::string& field, const std::string& name) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    csv_fail(path, line, name + " is not an integer: \"" + field + "\"");
  return v;
}

double parse_double(const std::filesystem::path& path, std::size_t line,
                    const std::string& field, const std::string& name) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v))
    csv_fail(path, line, name + " is not a finite number: \"" + field + "\"");
  return v;
}

std::optional<int> parse_opt_int(const std::filesystem::path& path, std::size_t line,
                                 const std::string& field, const std::string& name) {
  if (field.empty()) return std::nullopt;
  return parse_int(path, line, field, name);
}

/// Formats a double so that parsing the text recovers the value exactly.
std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return std::move(os).str();
}

constexpr char kMetaHeader[] =
    "image_id,camera_id,track_id,identity_id,brand_id,type_id,orientation_deg";
constexpr char kTruthHeader[] =
    "image_id,split,identity_id,camera_id,track_id,brand_id,type_id,orientation_deg";

}  // namespace

// ---------------------------------------------------------------------------
// EMB1
// ---------------------------------------------------------------------------

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  EmbeddingSet e;
  load_f32_payload(path, "EMB1", [&](const std::string& bytes) -> std::size_t {
    if (bytes.size() < 12)
      throw IoError(path.string() + ": truncated header, file ends at byte offset " +
                    std::to_string(bytes.size()) + " but needs 12");
    const std::uint32_t n = read_u32(bytes, 4);
    const std::uint32_t dim = read_u32(bytes, 8);
    if (dim == 0) throw IoError(path.string() + ": zero dim at byte offset 8");
    e.data.resize(static_cast<Index>(n), static_cast<Index>(dim));
    return 12;
  }, e.data);
  for (Index i = 0; i < e.n_images(); ++i)
    if (!(e.data.row(i).norm() > 0.0f))
      throw IoError(path.string() + ": zero-norm embedding row " + std::to_string(i) +
                    " at byte offset " +
                    std::to_string(12 + static_cast<std::uint64_t>(i) * e.dim() * 4));
  return e;
}

void save_embeddings(const EmbeddingSet& e, const std::filesystem::path& path) {
  std::string bytes = "EMB1";
  append_u32(bytes, static_cast<std::uint32_t>(e.n_images()));
  append_u32(bytes, static_cast<std::uint32_t>(e.dim()));
  const std::size_t payload = static_cast<std::size_t>(e.n_images()) * e.dim() * 4;
  bytes.resize(12 + payload);
  if (payload > 0) std::memcpy(bytes.data() + 12, e.data.data(), payload);
  write_file(path, bytes);
}

// ---------------------------------------------------------------------------
// SCM1
// ---------------------------------------------------------------------------

ScoreMatrix load_scores(const std::filesystem::path& path) {
  Matf values;
  Polarity polarity = Polarity::similarity;
  load_f32_payload(path, "SCM1", [&](const std::string& bytes) -> std::size_t {
    if (bytes.size() < 13)
      throw IoError(path.string() + ": truncated header, file ends at byte offset " +
                    std::to_string(bytes.size()) + " but needs 13");
    const std::uint32_t nq = read_u32(bytes, 4);
    const std::uint32_t ng = read_u32(bytes, 8);
    const auto pol = static_cast<unsigned char>(bytes[12]);
    if (pol > 1)
      throw IoError(path.string() + ": invalid polarity byte at byte offset 12");
    polarity = static_cast<Polarity>(pol);
    values.resize(static_cast<Index>(nq), static_cast<Index>(ng));
    return 13;
  }, values);
  return {values.cast<double>(), polarity};
}

void save_scores(const ScoreMatrix& s, const std::filesystem::path& path) {
  std::string bytes = "SCM1";
  append_u32(bytes, static_cast<std::uint32_t>(s.n_query()));
  append_u32(bytes, static_cast<std::uint32_t>(s.n_gallery()));
  bytes.push_back(static_cast<char>(s.polarity));
  const Matf narrowed = s.values.cast<float>();
  const std::size_t payload = static_cast<std::size_t>(narrowed.size()) * 4;
  bytes.resize(13 + payload);
  if (payload > 0) std::memcpy(bytes.data() + 13, narrowed.data(), payload);
  write_file(path, bytes);
}

// ---------------------------------------------------------------------------
// Metadata CSV
// ---------------------------------------------------------------------------

MetadataTable load_metadata(const std::filesystem::path& path) {
  const std::vector<std::string> lines = split_lines(path, read_file(path));
  if (lines.empty()) csv_fail(path, 1, "missing header");
  if (lines[0] != kMetaHeader)
    csv_fail(path, 1, "header must be exactly \"" + std::string(kMetaHeader) + "\"");

  std::vector<MetaRecord> rows;
  rows.reserve(lines.size() - 1);
  std::unordered_set<std::string> seen;
  std::unordered_map<int, int> track_camera;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    const std::vector<std::string> f = split_fields(lines[li]);
    if (f.size() != 7)
      csv_fail(path, line_no, "expected 7 fields, got " + std::to_string(f.size()));
    MetaRecord r;
    r.image_id = f[0];
    if (r.image_id.empty()) csv_fail(path, line_no, "empty image_id");
    if (!seen.insert(r.image_id).second)
      csv_fail(path, line_no, "duplicate image_id \"" + r.image_id + "\"");
    r.camera_id = parse_int(path, line_no, f[1], "camera_id");
    r.track_id = parse_opt_int(path, line_no, f[2], "track_id");
    r.identity_id = parse_opt_int(path, line_no, f[3], "identity_id");
    r.brand_id = parse_opt_int(path, line_no, f[4], "brand_id");
    r.type_id = parse_opt_int(path, line_no, f[5], "type_id");
    if (!f[6].empty()) {
      const double deg = parse_double(path, line_no, f[6], "orientation_deg");
      if (!(deg >= 0.0 && deg < 360.0))
        csv_fail(path, line_no, "orientation_deg " + f[6] + " outside [0, 360)");
      r.orientation_deg = deg;
    }
    if (r.track_id) {
      auto [it, inserted] = track_camera.emplace(*r.track_id, r.camera_id);
      if (!inserted && it->second != r.camera_id)
        csv_fail(path, line_no, "track " + std::to_string(*r.track_id) +
                                    " spans cameras " + std::to_string(it->second) +
                                    " and " + std::to_string(r.camera_id));
    }
    rows.push_back(std::move(r));
  }
  return MetadataTable(std::move(rows));
}

void save_metadata(const MetadataTable& t, const std::filesystem::path& path) {
  std::string out = kMetaHeader;
  out.push_back('\n');
  for (const MetaRecord& r : t.rows()) {
    out += r.image_id;
    out += ',' + std::to_string(r.camera_id);
    out += ',';
    if (r.track_id) out += std::to_string(*r.track_id);
    out += ',';
    if (r.identity_id) out += std::to_string(*r.identity_id);
    out += ',';
    if (r.brand_id) out += std::to_string(*r.brand_id);
    out += ',';
    if (r.type_id) out += std::to_string(*r.type_id);
    out += ',';
    if (r.orientation_deg) out += format_double(*r.orientation_deg);
    out.push_back('\n');
  }
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// Truth CSV
// ---------------------------------------------------------------------------

ScenarioTruth load_truth(const std::filesystem::path& path) {
  const std::vector<std::string> lines = split_lines(path, read_file(path));
  if (lines.empty()) csv_fail(path, 1, "missing header");
  if (lines[0] != kTruthHeader)
    csv_fail(path, 1, "header must be exactly \"" + std::string(kTruthHeader) + "\"");

  ScenarioTruth truth;
  std::unordered_set<std::string> seen;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    const std::vector<std::string> f = split_fields(lines[li]);
    if (f.size() != 8)
      csv_fail(path, line_no, "expected 8 fields, got " + std::to_string(f.size()));
    TruthRecord r;
    r.image_id = f[0];
    if (r.image_id.empty()) csv_fail(path, line_no, "empty image_id");
    if (!seen.insert(r.image_id).second)
      csv_fail(path, line_no, "duplicate image_id \"" + r.image_id + "\"");
    r.identity_id = parse_int(path, line_no, f[2], "identity_id");
    r.camera_id = parse_int(path, line_no, f[3], "camera_id");
    r.track_id = parse_int(path, line_no, f[4], "track_id");
    r.brand_id = parse_int(path, line_no, f[5], "brand_id");
    r.type_id = parse_int(path, line_no, f[6], "type_id");
    r.orientation_deg = parse_double(path, line_no, f[7], "orientation_deg");
    if (!(r.orientation_deg >= 0.0 && r.orientation_deg < 360.0))
      csv_fail(path, line_no, "orientation_deg " + f[7] + " outside [0, 360)");
    if (f[1] == "query")
      truth.query.push_back(std::move(r));
    else if (f[1] == "gallery")
      truth.gallery.push_back(std::move(r));
    else
      csv_fail(path, line_no, "split must be \"query\" or \"gallery\", got \"" + f[1] + "\"");
  }
  return truth;
}

void save_truth(const ScenarioTruth& t, const std::filesystem::path& path) {
  std::string out = kTruthHeader;
  out.push_back('\n');
  const auto emit = [&out](const TruthRecord& r, const char* split) {
    out += r.image_id;
    out += ',';
    out += split;
    out += ',' + std::to_string(r.identity_id);
    out += ',' + std::to_string(r.camera_id);
    out += ',' + std::to_string(r.track_id);
    out += ',' + std::to_string(r.brand_id);
    out += ',' + std::to_string(r.type_id);
    out += ',' + format_double(r.orientation_deg);
    out.push_back('\n');
  };
  for (const TruthRecord& r : t.query) emit(r, "query");
  for (const TruthRecord& r : t.gallery) emit(r, "gallery");
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// Submission rank lists
// ---------------------------------------------------------------------------

void write_submission(const RankList& r, int top_k, const std::filesystem::path& path) {
  if (top_k < 1) throw ParamError("write_submission: top_k must be positive");
  std::string out;
  for (Index q = 0; q < r.n_query(); ++q) {
    const std::vector<int>& row = r.row(q);
    if (static_cast<int>(row.size()) < top_k)
      throw ParamError("write_submission: query " + std::to_string(q) + " has " +
                       std::to_string(row.size()) + " entries, need " +
                       std::to_string(top_k));
    for (int t = 0; t < top_k; ++t) {
      if (t > 0) out.push_back(' ');
      out += std::to_string(row[static_cast<std::size_t>(t)] + 1);
    }
    out.push_back('\n');
  }
  write_file(path, out);
}

RankList load_submission(const std::filesystem::path& path, int n_gallery) {
  const std::vector<std::string> lines = split_lines(path, read_file(path));
  std::vector<std::vector<int>> rows;
  rows.reserve(lines.size());
  for (std::size_t li = 0; li < lines.size(); ++li) {
    std::vector<int> row;
    std::istringstream is(lines[li]);
    std::string tok;
    while (is >> tok) {
      int v = 0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 1)
        throw SchemaError(path.string() + " line " + std::to_string(li + 1) +
                          ": bad 1-based gallery index \"" + tok + "\"");
      row.push_back(v - 1);
    }
    if (row.empty())
      throw SchemaError(path.string() + " line " + std::to_string(li + 1) + ": empty rank row");
    rows.push_back(std::move(row));
  }
  try {
    return RankList(n_gallery, std::move(rows));
  } catch (const ParamError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Metrics report
// ---------------------------------------------------------------------------

std::string format_metrics_json(const EvalResult& res, const std::string& repro_key) {
  nlohmann::json j;
  j["map"] = res.map;
  j["rank1"] = res.rank1;
  j["rank5"] = res.rank5;
  j["evaluated_queries"] = res.evaluated;
  nlohmann::json ap = nlohmann::json::array();
  for (const auto& v : res.per_query_ap) {
    if (v)
      ap.push_back(*v);
    else
      ap.push_back(nullptr);
  }
  j["per_query_ap"] = std::move(ap);
  j["repro_key"] = repro_key;
  return j.dump(2) + "\n";
}

void write_metrics(const EvalResult& res, const std::string& repro_key,
                   const std::filesystem::path& path) {
  write_file(path, format_metrics_json(res, repro_key));
}

// ---------------------------------------------------------------------------
// Reproducibility key
// ---------------------------------------------------------------------------

std::uint64_t fnv1a(std::uint64_t state, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    state ^= p[i];
    state *= 1099511628211ULL;
  }
  return state;
}

std::uint64_t fnv1a_file(std::uint64_t state, const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  return fnv1a(state, bytes.data(), bytes.size());
}

std::string hex_key(std::uint64_t state) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << state;
  return std::move(os).str();
}

}  // namespace reid
