#ifndef MHAS_DATA_IO_HPP_
#define MHAS_DATA_IO_HPP_

// Line-delimited JSON schemas shared by every subcommand.
//
// Each file holds one record per line with a fixed field order. Reals are
// written with six decimals, integers as integers, so a canonically written
// file reloads and rewrites byte-identically.

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mhas/core.hpp"

namespace mhas {

/// Images and their annotations in file order.
struct Dataset {
  std::vector<ImageMeta> images;
  std::vector<std::vector<Annotation>> annotations;  // parallel to images

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  std::size_t annotation_count() const;
  std::optional<std::size_t> index_of(const std::string& image_id) const;

  /// Appends an image; throws ValidationError on a duplicate id or invalid box.
  void add_image(ImageMeta meta, std::vector<Annotation> anns);

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

/// Detections grouped per image; images keep first-appearance order.
class DetectionSet {
 public:
  void add(const std::string& image_id, const Detection& det);
  /// Replaces the list for `image_id` (registering the id if new).
  void set(const std::string& image_id, std::vector<Detection> dets);

  /// Empty span-like list when the image has no detections.
  const std::vector<Detection>& for_image(const std::string& image_id) const;
  const std::vector<std::string>& image_ids() const { return order_; }
  std::size_t total() const;

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::vector<Detection>> lists_;
};

enum class ProfileKind { mean_height, existence };

const char* to_string(ProfileKind kind);

/// One serialized per-level vector. `image_id` is set for per-image profiles
/// and absent for a profile shared by all images.
struct ProfileRecord {
  std::optional<std::string> image_id;
  LevelGrid grid;
  std::vector<double> values;
  ProfileKind kind = ProfileKind::mean_height;
};

struct CoefficientRecord {
  std::string image_id;
  double a = 0.0;
  double b = 0.0;
};

/// Either one global (a, b) pair or per-image pairs, never both.
struct CoefficientFile {
  std::optional<std::pair<double, double>> global;
  std::vector<CoefficientRecord> per_image;

  /// Coefficients applying to `image_id`; throws ValidationError when missing.
  std::pair<double, double> lookup(const std::string& image_id) const;
};

/// Fixed six-decimal rendering used by every writer.
std::string format_real(double v);

Dataset parse_dataset(std::istream& in, const std::string& source);
Dataset load_dataset(const std::string& path);
void write_dataset(std::ostream& out, const Dataset& ds);
void save_dataset(const std::string& path, const Dataset& ds);

/// When `reference` is given, records naming unknown images are an error.
DetectionSet parse_detections(std::istream& in, const std::string& source,
                              const Dataset* reference = nullptr);
DetectionSet load_detections(const std::string& path, const Dataset* reference = nullptr);
void write_detections(std::ostream& out, const DetectionSet& dets);
void save_detections(const std::string& path, const DetectionSet& dets);

/// COCO-style results: a JSON array of {image_id, bbox: [x, y, w, h], score}.
/// Numeric image ids are converted to their decimal string.
DetectionSet parse_coco_results(std::istream& in, const std::string& source);
DetectionSet import_coco_results(const std::string& path);

std::vector<ProfileRecord> parse_profiles(std::istream& in, const std::string& source);
std::vector<ProfileRecord> load_profiles(const std::string& path);
void write_profiles(std::ostream& out, const std::vector<ProfileRecord>& profiles);
void save_profiles(const std::string& path, const std::vector<ProfileRecord>& profiles);

CoefficientFile parse_coefficients(std::istream& in, const std::string& source);
CoefficientFile load_coefficients(const std::string& path);
void write_coefficients(std::ostream& out, const CoefficientFile& coeffs);
void save_coefficients(const std::string& path, const CoefficientFile& coeffs);

/// Opens a file for writing or throws IoError.
std::ofstream open_output(const std::string& path);
std::ifstream open_input(const std::string& path);

}  // namespace mhas

#endif  // MHAS_DATA_IO_HPP_
