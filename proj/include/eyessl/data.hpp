#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eyessl/config.hpp"
#include "eyessl/random.hpp"
#include "eyessl/types.hpp"

namespace eyessl {

// ---------------------------------------------------------------------------
// On-disk datasets. Layout under a split directory:
//   images/<subject>/<frame>.png   8-bit grayscale (colour is converted)
//   labels/<subject>/<frame>.png   8-bit class indices, optional per frame
// A dataset root holds train/ and validation/ split directories, or is itself
// a single split directory (no validation set).

struct IngestOptions {
  int height = 240;
  int width = 320;
  int num_classes = kDefaultNumClasses;
};

struct IngestedData {
  DatasetPool train;
  std::vector<LabeledItem> validation;
};

DatasetPool ingest_directory(const std::filesystem::path& dir, const IngestOptions& options);
IngestedData ingest(const std::filesystem::path& root, const IngestOptions& options);
void write_dataset(const std::filesystem::path& dir, const DatasetPool& pool);

Tensor<std::uint8_t> to_gray8(const EyeImage& image);

// ---------------------------------------------------------------------------
// Labeled-subset selection.

struct SplitSpec {
  int k = 4;
  SplitMode mode = SplitMode::kMultiSubject;
  std::optional<std::string> subject;
  std::uint64_t seed = 0;
};

/// Draws the labeled subset from pool.labeled; every labeled frame not chosen
/// joins the unlabeled pool as an image. Multi-subject: with k < #subjects one
/// frame from each of k random subjects, otherwise floor(k / #subjects) frames
/// per subject and the remainder one each to random subjects. Single-subject:
/// all k frames from one subject.
DatasetPool make_split(const DatasetPool& pool, const SplitSpec& spec);

/// JSON record of a split (seed, mode, k, frame ids by role).
std::string split_manifest(const DatasetPool& split, const SplitSpec& spec,
                           std::span<const LabeledItem> validation);

// ---------------------------------------------------------------------------
// Synthetic eyes.

struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double ax = 1.0;  // semi-axis along the rotated x direction
  double ay = 1.0;
  double angle = 0.0;  // radians

  bool contains(double x, double y) const;
  /// True when every sampled boundary point of `inner` lies inside this ellipse.
  bool encloses(const Ellipse& inner, int samples = 72) const;
};

struct SyntheticEyeParams {
  int height = 64;
  int width = 96;
  Ellipse sclera;
  Ellipse iris;
  Ellipse pupil;
  double skin_level = 0.6;
  double sclera_level = 0.8;
  double iris_level = 0.35;
  double pupil_level = 0.08;
  double exposure = 1.0;  // gain before the response curve
  double contrast_gamma = 1.0;
  double shading = 0.0;  // horizontal illumination slope across the frame
  double noise = 0.02;
  double eyelid = 0.0;   // fraction of the sclera height hidden by the upper lid
  bool glint = true;
};

struct SyntheticSpec {
  int height = 64;
  int width = 96;
  int num_subjects = 10;
  std::string subject_prefix = "S";
};

LabeledItem render_eye(const SyntheticEyeParams& params, const std::string& frame_id,
                       const std::string& subject_id, RandomStream& rng);

/// n frames split as evenly as possible over spec.num_subjects pseudo-subjects;
/// frames of one subject share geometry and photometry up to per-frame gaze,
/// lid, pupil and noise variation.
std::vector<LabeledItem> generate_synthetic(int n, RandomStream& rng, const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Experiment inputs as a config describes them.

struct ExperimentData {
  DatasetPool pool;  // after the labeled-subset split when cfg.k is set
  std::vector<LabeledItem> validation;
  std::optional<SplitSpec> split;
};

/// Synthetic sources draw train and validation frames from streams derived
/// from cfg.seed (distinct subject prefixes keep the sets disjoint); directory
/// sources are ingested at the model input size and must provide a
/// validation split.
ExperimentData prepare_data(const TrainConfig& cfg);

}  // namespace eyessl
