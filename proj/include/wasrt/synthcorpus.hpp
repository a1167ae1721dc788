#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "wasrt/datamodel.hpp"

namespace wasrt {

struct Rgb {
    double r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Striped sprite with a static ragged silhouette. Used both for floating
/// obstacles and for the off-frame sources of detached reflections.
struct SpriteLook {
    Rgb color;
    double stripe_period = 3.0;
    double stripe_phase = 0.0;
    double stripe_contrast = 0.3;
    int ragged = 1;           // max per-row silhouette inset, pixels
    std::uint64_t shape_seed = 0;
    friend bool operator==(const SpriteLook&, const SpriteLook&) = default;
};

/// Obstacle floating on the water plane: its bottom row is the waterline,
/// which must lie at or below the horizon.
struct FloatingObject {
    int x = 0;          // left column
    int waterline = 0;  // first row below the object
    int width = 8;
    int height = 8;
    SpriteLook look;
    bool reflected = true;         // draw a mirrored copy below the waterline
    double reflection_alpha = 0.8;
    friend bool operator==(const FloatingObject&, const FloatingObject&) = default;
};

/// Reflection whose source lies outside the image: only the mirrored, warped
/// copy is visible on the water.
struct DetachedReflection {
    int x = 0, y = 0, width = 8, height = 8;
    SpriteLook look;
    double alpha = 0.85;
    friend bool operator==(const DetachedReflection&, const DetachedReflection&) = default;
};

struct ReflectionParams {
    double warp_amplitude = 2.0;     // horizontal displacement, pixels
    double temporal_frequency = 0.35; // cycles per frame of the ripple pattern
    double ripple_contrast = 0.25;
    friend bool operator==(const ReflectionParams&, const ReflectionParams&) = default;
};

struct GlitterParams {
    double density = 0.01;     // speck probability per water pixel inside the sun band
    double flicker_rate = 1.0; // fraction of specks re-drawn each frame
    int band_x = 0;
    int band_width = 0;        // 0 = whole width
    friend bool operator==(const GlitterParams&, const GlitterParams&) = default;
};

struct SceneSpec {
    std::uint64_t seed = 0;
    int height = 48;
    int width = 80;
    int horizon = 16;           // first water row
    int shore_height = 4;       // mean thickness of the land band above the horizon
    int length = 8;             // frames
    std::vector<FloatingObject> objects;
    std::vector<DetachedReflection> detached;
    ReflectionParams reflection;
    GlitterParams glitter;
    bool reflection_heavy = false;  // tags the scene as extension subset
    double danger_zone_fraction = 0.4;

    /// Throws ConfigError (object outside image, bad lengths, ...).
    void validate() const;
    friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);

/// Draw a random scene. Reflection-heavy scenes carry several detached
/// reflections and denser glitter.
SceneSpec random_scene(std::uint64_t seed, bool reflection_heavy, int height = 48, int width = 80, int length = 8);

struct GeneratedSequence {
    std::vector<Frame> frames;
    std::vector<FrameAnnotation> annotations;
    ZoneMask reflection_region;  // pixels covered by any reflection in any frame
    ZoneMask object_region;      // pixels of true obstacles
};

GeneratedSequence generate_sequence(const SceneSpec& spec);

struct EmitOptions {
    int context_length = 5;
    bool pad_sequence_start = false;  // emit entries for frames with fewer than T predecessors
    int max_entries_per_sequence = 0; // keep only the newest k entries per sequence (0 = all)
};

/// Writes frames, masks and annotations under out_dir/<sequence>/ and the
/// manifest at out_dir/manifest.jsonl.
CorpusManifest emit_corpus(const std::vector<SceneSpec>& specs, const fs::path& out_dir, const EmitOptions& opts);

/// Builds in-memory samples exactly as emit_corpus + load_sample would (up to
/// 8-bit quantization of frames, which this path applies too).
struct InMemoryCorpus {
    std::vector<TemporalSample> samples;
    std::vector<Subset> subsets;
};
InMemoryCorpus build_corpus(const std::vector<SceneSpec>& specs, const EmitOptions& opts);

/// Batch of random scenes with consecutive seeds; a `heavy_fraction` share of
/// them, spread evenly, is reflection-heavy.
struct CorpusRecipe {
    std::uint64_t seed = 1000;
    int sequences = 200;
    double heavy_fraction = 0.5;
    int height = 48;
    int width = 80;
    int length = 8;
};
std::vector<SceneSpec> recipe_scenes(const CorpusRecipe& recipe);
void to_json(nlohmann::json& j, const CorpusRecipe& r);
void from_json(const nlohmann::json& j, CorpusRecipe& r);

/// Mean over pixels of the per-pixel temporal variance (averaged over channels).
double mean_temporal_variance(const std::vector<Frame>& frames, const ZoneMask& region);

}  // namespace wasrt
