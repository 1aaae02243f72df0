#include "mhas/data_io.hpp"

#include <cmath>
#include <cstdio>
#include <initializer_list>
#include <sstream>

#include "json.hpp"

namespace mhas {

using nlohmann::json;

namespace {

// Field access on one parsed JSONL record with located error messages.
class Record {
 public:
  Record(json obj, const std::string& source, std::size_t line)
      : obj_(std::move(obj)), source_(source), line_(line) {}

  [[noreturn]] void fail(const std::string& field, const std::string& msg) const {
    std::ostringstream os;
    os << source_ << ":" << line_ << ": field '" << field << "': " << msg;
    throw ValidationError(os.str());
  }

  [[noreturn]] void fail_record(const std::string& msg) const {
    std::ostringstream os;
    os << source_ << ":" << line_ << ": " << msg;
    throw ValidationError(os.str());
  }

  void allow_only(std::initializer_list<const char*> keys) const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      bool known = false;
      for (const char* k : keys) known = known || it.key() == k;
      if (!known) fail(it.key(), "unknown field");
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }

  const json& at(const char* key) const {
    auto it = obj_.find(key);
    if (it == obj_.end()) fail(key, "missing");
    return *it;
  }

  double real(const char* key) const { return real_value(at(key), key); }

  double real_value(const json& v, const std::string& field) const {
    if (!v.is_number()) fail(field, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(field, "must be finite");
    return d;
  }

  long integer(const char* key) const {
    const json& v = at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<long>();
  }

  std::string string(const char* key) const {
    const json& v = at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  BBox box(const char* key) const { return box_value(at(key), key); }

  BBox box_value(const json& v, const std::string& field) const {
    if (!v.is_array() || v.size() != 4) fail(field, "expected [x, y, w, h]");
    BBox b{real_value(v[0], field), real_value(v[1], field), real_value(v[2], field),
           real_value(v[3], field)};
    if (!(b.w > 0.0)) fail(field, "width must be > 0");
    if (!(b.h > 0.0)) fail(field, "height must be > 0");
    return b;
  }

  const json& object() const { return obj_; }

 private:
  json obj_;
  const std::string& source_;
  std::size_t line_;
};

// Calls fn(Record) for every non-blank line holding a JSON object.
template <typename Fn>
void for_each_record(std::istream& in, const std::string& source, Fn&& fn) {
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ValidationError(source + ":" + std::to_string(line) + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object())
      throw ValidationError(source + ":" + std::to_string(line) + ": record must be a JSON object");
    fn(Record(std::move(obj), source, line));
  }
  if (in.bad()) throw IoError(source + ": read failure");
}

std::string quote(const std::string& s) { return json(s).dump(); }

void write_box(std::ostream& out, const BBox& b) {
  out << '[' << format_real(b.x) << ',' << format_real(b.y) << ',' << format_real(b.w) << ','
      << format_real(b.h) << ']';
}

void check_score(const Record& rec, double score) {
  if (score < 0.0 || score > 1.0) rec.fail("score", "must lie in [0, 1]");
}

template <typename Fn>
void write_file(const std::string& path, Fn&& fn) {
  std::ofstream out = open_output(path);
  fn(out);
  out.flush();
  if (!out) throw IoError(path + ": write failure");
}

}  // namespace

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");
  return in;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

const char* to_string(ProfileKind kind) {
  return kind == ProfileKind::mean_height ? "mean_height" : "existence";
}

// ---------------------------------------------------------------------------
// Dataset

std::size_t Dataset::annotation_count() const {
  std::size_t n = 0;
  for (const auto& a : annotations) n += a.size();
  return n;
}

std::optional<std::size_t> Dataset::index_of(const std::string& image_id) const {
  auto it = index_.find(image_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Dataset::add_image(ImageMeta meta, std::vector<Annotation> anns) {
  if (meta.width <= 0 || meta.height <= 0)
    throw ValidationError("image '" + meta.image_id + "': width and height must be positive");
  for (const auto& a : anns) validate_annotation(a);
  if (!index_.emplace(meta.image_id, images.size()).second)
    throw ValidationError("duplicate image_id '" + meta.image_id + "'");
  images.push_back(std::move(meta));
  annotations.push_back(std::move(anns));
}

Dataset parse_dataset(std::istream& in, const std::string& source) {
  Dataset ds;
  for_each_record(in, source, [&](const Record& rec) {
    rec.allow_only({"image_id", "width", "height", "annotations"});
    ImageMeta meta;
    meta.image_id = rec.string("image_id");
    const long w = rec.integer("width");
    const long h = rec.integer("height");
    if (w <= 0) rec.fail("width", "must be positive");
    if (h <= 0) rec.fail("height", "must be positive");
    meta.width = static_cast<int>(w);
    meta.height = static_cast<int>(h);

    const json& list = rec.at("annotations");
    if (!list.is_array()) rec.fail("annotations", "expected an array");
    std::vector<Annotation> anns;
    anns.reserve(list.size());
    for (std::size_t i = 0; i < list.size(); ++i) {
      const json& item = list[i];
      const std::string where = "annotations[" + std::to_string(i) + "]";
      if (!item.is_object()) rec.fail(where, "expected an object");
      for (auto it = item.begin(); it != item.end(); ++it)
        if (it.key() != "full" && it.key() != "visible") rec.fail(where + "." + it.key(), "unknown field");
      if (!item.contains("full")) rec.fail(where + ".full", "missing");
      Annotation ann;
      ann.full = rec.box_value(item["full"], where + ".full");
      if (item.contains("visible")) {
        ann.visible = rec.box_value(item["visible"], where + ".visible");
        try {
          validate_annotation(ann);
        } catch (const ValidationError& e) {
          rec.fail(where + ".visible", e.what());
        }
      }
      anns.push_back(ann);
    }
    if (ds.index_of(meta.image_id)) rec.fail("image_id", "duplicate image_id '" + meta.image_id + "'");
    ds.add_image(std::move(meta), std::move(anns));
  });
  return ds;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in = open_input(path);
  return parse_dataset(in, path);
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const ImageMeta& m = ds.images[i];
    out << "{\"image_id\":" << quote(m.image_id) << ",\"width\":" << m.width
        << ",\"height\":" << m.height << ",\"annotations\":[";
    const auto& anns = ds.annotations[i];
    for (std::size_t k = 0; k < anns.size(); ++k) {
      if (k) out << ',';
      out << "{\"full\":";
      write_box(out, anns[k].full);
      if (anns[k].visible) {
        out << ",\"visible\":";
        write_box(out, *anns[k].visible);
      }
      out << '}';
    }
    out << "]}\n";
  }
}

void save_dataset(const std::string& path, const Dataset& ds) {
  write_file(path, [&](std::ostream& out) { write_dataset(out, ds); });
}

// ---------------------------------------------------------------------------
// Detections

void DetectionSet::add(const std::string& image_id, const Detection& det) {
  auto [it, inserted] = lists_.try_emplace(image_id);
  if (inserted) order_.push_back(image_id);
  it->second.push_back(det);
}

void DetectionSet::set(const std::string& image_id, std::vector<Detection> dets) {
  auto [it, inserted] = lists_.try_emplace(image_id);
  if (inserted) order_.push_back(image_id);
  it->second = std::move(dets);
}

const std::vector<Detection>& DetectionSet::for_image(const std::string& image_id) const {
  static const std::vector<Detection> kEmpty;
  auto it = lists_.find(image_id);
  return it == lists_.end() ? kEmpty : it->second;
}

std::size_t DetectionSet::total() const {
  std::size_t n = 0;
  for (const auto& [id, list] : lists_) n += list.size();
  return n;
}

DetectionSet parse_detections(std::istream& in, const std::string& source,
                              const Dataset* reference) {
  DetectionSet set;
  for_each_record(in, source, [&](const Record& rec) {
    rec.allow_only({"image_id", "x", "y", "w", "h", "score"});
    const std::string id = rec.string("image_id");
    Detection d;
    d.box = {rec.real("x"), rec.real("y"), rec.real("w"), rec.real("h")};
    if (!(d.box.w > 0.0)) rec.fail("w", "must be > 0");
    if (!(d.box.h > 0.0)) rec.fail("h", "must be > 0");
    d.score = rec.real("score");
    check_score(rec, d.score);
    if (reference && !reference->index_of(id))
      rec.fail("image_id", "unknown image_id '" + id + "' (not in dataset)");
    set.add(id, d);
  });
  return set;
}

DetectionSet load_detections(const std::string& path, const Dataset* reference) {
  std::ifstream in = open_input(path);
  return parse_detections(in, path, reference);
}

void write_detections(std::ostream& out, const DetectionSet& dets) {
  for (const auto& id : dets.image_ids()) {
    const std::string q = quote(id);
    for (const Detection& d : dets.for_image(id)) {
      out << "{\"image_id\":" << q << ",\"x\":" << format_real(d.box.x)
          << ",\"y\":" << format_real(d.box.y) << ",\"w\":" << format_real(d.box.w)
          << ",\"h\":" << format_real(d.box.h) << ",\"score\":" << format_real(d.score) << "}\n";
    }
  }
}

void save_detections(const std::string& path, const DetectionSet& dets) {
  write_file(path, [&](std::ostream& out) { write_detections(out, dets); });
}

DetectionSet parse_coco_results(std::istream& in, const std::string& source) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(source + ": malformed JSON: " + e.what());
  }
  if (!doc.is_array()) throw ValidationError(source + ": expected a JSON array of results");
  DetectionSet set;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    // Errors name the 1-based array position in place of a line number.
    Record rec(doc[i], source, i + 1);
    if (!doc[i].is_object()) rec.fail_record("result must be a JSON object");
    const json& id = rec.at("image_id");
    std::string image_id;
    if (id.is_string())
      image_id = id.get<std::string>();
    else if (id.is_number_integer())
      image_id = std::to_string(id.get<long long>());
    else
      rec.fail("image_id", "expected a string or integer");
    Detection d;
    d.box = rec.box("bbox");
    d.score = rec.real("score");
    check_score(rec, d.score);
    set.add(image_id, d);
  }
  return set;
}

DetectionSet import_coco_results(const std::string& path) {
  std::ifstream in = open_input(path);
  return parse_coco_results(in, path);
}

// ---------------------------------------------------------------------------
// Profiles

std::vector<ProfileRecord> parse_profiles(std::istream& in, const std::string& source) {
  std::vector<ProfileRecord> out;
  for_each_record(in, source, [&](const Record& rec) {
    rec.allow_only({"image_id", "b_h", "n_levels", "values", "kind"});
    ProfileRecord p;
    if (rec.has("image_id")) p.image_id = rec.string("image_id");
    const long b_h = rec.integer("b_h");
    const long n = rec.integer("n_levels");
    if (b_h <= 0) rec.fail("b_h", "must be a positive integer");
    if (n < 0) rec.fail("n_levels", "must be non-negative");
    p.grid = LevelGrid{static_cast<int>(b_h), static_cast<int>(n)};
    const std::string kind = rec.string("kind");
    if (kind == "mean_height")
      p.kind = ProfileKind::mean_height;
    else if (kind == "existence")
      p.kind = ProfileKind::existence;
    else
      rec.fail("kind", "expected \"mean_height\" or \"existence\"");
    const json& vals = rec.at("values");
    if (!vals.is_array()) rec.fail("values", "expected an array");
    if (static_cast<long>(vals.size()) != n) rec.fail("values", "length differs from n_levels");
    p.values.reserve(vals.size());
    for (const json& v : vals) {
      const double d = rec.real_value(v, "values");
      if (p.kind == ProfileKind::existence && (d < 0.0 || d > 1.0))
        rec.fail("values", "existence values must lie in [0, 1]");
      if (p.kind == ProfileKind::mean_height && d < 0.0)
        rec.fail("values", "mean heights must be >= 0");
      p.values.push_back(d);
    }
    const bool shared = !p.image_id;
    if (!out.empty() && shared != !out.front().image_id)
      rec.fail_record("cannot mix shared and per-image profiles in one file");
    if (shared && !out.empty()) rec.fail_record("a shared profile file holds exactly one record");
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<ProfileRecord> load_profiles(const std::string& path) {
  std::ifstream in = open_input(path);
  return parse_profiles(in, path);
}

void write_profiles(std::ostream& out, const std::vector<ProfileRecord>& profiles) {
  for (const ProfileRecord& p : profiles) {
    out << '{';
    if (p.image_id) out << "\"image_id\":" << quote(*p.image_id) << ',';
    out << "\"b_h\":" << p.grid.b_h << ",\"n_levels\":" << p.grid.n_levels << ",\"values\":[";
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      if (i) out << ',';
      out << format_real(p.values[i]);
    }
    out << "],\"kind\":\"" << to_string(p.kind) << "\"}\n";
  }
}

void save_profiles(const std::string& path, const std::vector<ProfileRecord>& profiles) {
  write_file(path, [&](std::ostream& out) { write_profiles(out, profiles); });
}

// ---------------------------------------------------------------------------
// Coefficients

std::pair<double, double> CoefficientFile::lookup(const std::string& image_id) const {
  if (global) return *global;
  for (const auto& r : per_image)
    if (r.image_id == image_id) return {r.a, r.b};
  throw ValidationError("no perspective coefficients for image '" + image_id + "'");
}

CoefficientFile parse_coefficients(std::istream& in, const std::string& source) {
  CoefficientFile file;
  std::size_t records = 0;
  for_each_record(in, source, [&](const Record& rec) {
    ++records;
    if (rec.has("global")) {
      rec.allow_only({"global"});
      if (records != 1) rec.fail("global", "global coefficients must be the only record");
      const json& g = rec.at("global");
      if (!g.is_object() || g.size() != 2 || !g.contains("a") || !g.contains("b"))
        rec.fail("global", "expected {\"a\": ..., \"b\": ...}");
      file.global = std::make_pair(rec.real_value(g["a"], "global.a"), rec.real_value(g["b"], "global.b"));
      return;
    }
    if (file.global) rec.fail_record("per-image record after a global record");
    rec.allow_only({"image_id", "a", "b"});
    CoefficientRecord r{rec.string("image_id"), rec.real("a"), rec.real("b")};
    for (const auto& prev : file.per_image)
      if (prev.image_id == r.image_id) rec.fail("image_id", "duplicate image_id '" + r.image_id + "'");
    file.per_image.push_back(std::move(r));
  });
  if (!file.global && file.per_image.empty())
    throw ValidationError(source + ": no coefficient records");
  return file;
}

CoefficientFile load_coefficients(const std::string& path) {
  std::ifstream in = open_input(path);
  return parse_coefficients(in, path);
}

void write_coefficients(std::ostream& out, const CoefficientFile& coeffs) {
  if (coeffs.global && !coeffs.per_image.empty())
    throw ValidationError("coefficient file holds either global or per-image coefficients");
  if (coeffs.global) {
    out << "{\"global\":{\"a\":" << format_real(coeffs.global->first)
        << ",\"b\":" << format_real(coeffs.global->second) << "}}\n";
    return;
  }
  for (const auto& r : coeffs.per_image)
    out << "{\"image_id\":" << quote(r.image_id) << ",\"a\":" << format_real(r.a)
        << ",\"b\":" << format_real(r.b) << "}\n";
}

void save_coefficients(const std::string& path, const CoefficientFile& coeffs) {
  write_file(path, [&](std::ostream& out) { write_coefficients(out, coeffs); });
}

}  // namespace mhas
