#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xdet/image.hpp"

namespace xdet {

enum class Domain { source, target };

const char* domain_name(Domain d);
Domain domain_from_name(const std::string& name);

struct Annotation {
  BoundingBox box;
  int class_id = 0;  // 0 disk, 1 square, 2 triangle
};

inline constexpr int kNumClasses = 3;
inline constexpr int kSceneSize = 64;
extern const char* const kClassNames[kNumClasses];

struct Scene {
  ImageBuffer image;
  std::vector<Annotation> annotations;
  Domain domain = Domain::source;
  std::int64_t id = 0;
};

// Deterministic scene from seed. Source and target scenes built from the same
// seed share annotations exactly; the target rendering additionally applies
// the fog shift (gray alpha-blend, 3x3 box blur, contrast reduction) after
// annotation, so the boxes stay valid.
Scene generate_scene(std::uint64_t seed, Domain domain, std::int64_t id = 0);

// Writes n_train + n_test scenes as PNGs plus one JSON index per split
// (<domain>_train.json / <domain>_test.json) under out_dir. Train and test
// use disjoint ids and therefore disjoint scene seeds.
void generate_split(std::uint64_t seed, int n_train, int n_test, Domain domain,
                    const std::string& out_dir);

struct IndexEntry {
  std::int64_t id = 0;
  std::string image_path;  // resolved against the index file's directory
  Domain domain = Domain::source;
  std::vector<Annotation> annotations;
};

std::vector<IndexEntry> load_index(const std::string& index_path);

// Labeled loader for source-domain training and for evaluation ground truth.
std::vector<Scene> load_scenes(const std::string& index_path);

struct UnlabeledImage {
  std::int64_t id = 0;
  ImageBuffer image;
};

// Loader used for target-domain training: annotations in the index are
// discarded and never reach the caller.
std::vector<UnlabeledImage> load_images_only(const std::string& index_path);

}  // namespace xdet
