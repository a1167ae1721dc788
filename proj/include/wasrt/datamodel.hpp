#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wasrt/tensor.hpp"

namespace wasrt {

namespace fs = std::filesystem;

/// Fixed label encoding shared by every module.
enum class Label : std::uint8_t { obstacle = 0, water = 1, sky = 2 };
inline constexpr int kNumClasses = 3;

struct Frame {
    Tensor image;  // [3][H][W], values in [0,1]
    std::string sequence_id;
    int frame_index = 0;

    int height() const { return image.dim(1); }
    int width() const { return image.dim(2); }
    /// Throws DataError unless the image is 3xHxW with finite values in [0,1].
    void validate() const;
};

/// Row-major H x W grid of small integers; used for label masks and boolean zones.
struct Grid {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> cells;

    Grid() = default;
    Grid(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), cells(static_cast<std::size_t>(h) * w, fill) {}

    std::uint8_t& operator()(int y, int x) { return cells[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t operator()(int y, int x) const { return cells[static_cast<std::size_t>(y) * width + x]; }
    bool same_size(const Grid& o) const { return height == o.height && width == o.width; }
    friend bool operator==(const Grid&, const Grid&) = default;
};

struct SegmentationMask : Grid {
    using Grid::Grid;
    SegmentationMask(int h, int w, Label fill) : Grid(h, w, static_cast<std::uint8_t>(fill)) {}
    Label label(int y, int x) const { return static_cast<Label>((*this)(y, x)); }
    bool is(int y, int x, Label l) const { return (*this)(y, x) == static_cast<std::uint8_t>(l); }
    /// Throws DataError if any label lies outside {0,1,2}.
    void validate() const;
};

/// Boolean grid; nonzero = inside.
using ZoneMask = Grid;

/// Half-open pixel box [x0,x1) x [y0,y1).
struct Box {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    long area() const { return static_cast<long>(x1 - x0) * (y1 - y0); }
    bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
    int center_x() const { return (x0 + x1 - 1) / 2; }
    int center_y() const { return (y0 + y1 - 1) / 2; }
    friend bool operator==(const Box&, const Box&) = default;
};

struct Point {
    int x = 0, y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

struct FrameAnnotation {
    SegmentationMask mask;
    std::vector<Box> obstacle_boxes;
    std::vector<Point> water_edge;
    ZoneMask danger_zone;  // empty when the source provides none

    void validate() const;
    friend bool operator==(const FrameAnnotation&, const FrameAnnotation&) = default;
};

struct TemporalSample {
    Frame target;
    std::vector<Frame> context;  // oldest first
    std::optional<FrameAnnotation> annotation;

    int context_length() const { return static_cast<int>(context.size()); }
};

enum class Subset { base, extension };
std::string to_string(Subset s);
Subset subset_from_string(const std::string& s);

struct ManifestEntry {
    std::string sequence_id;
    int frame_index = 0;
    Subset subset = Subset::base;
    std::string target_path;
    std::vector<std::string> context_paths;  // oldest first
    std::string annotation_path;
    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct CorpusManifest {
    int version = 1;
    int context_length = 0;
    std::vector<ManifestEntry> entries;
    fs::path root;  // directory that entry paths are relative to

    std::size_t count(Subset s) const;
    std::vector<std::size_t> indices(Subset s) const;
    bool operator==(const CorpusManifest& o) const {
        return version == o.version && context_length == o.context_length && entries == o.entries;
    }
};

inline constexpr int kManifestVersion = 1;

/// Manifest file: UTF-8 JSON Lines. Line 1 is the header
///   {"format":"wasrt-manifest","version":1,"context_length":T}
/// and every following line one entry, fields in this order:
///   sequence_id, frame_index, subset ("base"|"extension"), target, context[T], annotation.
/// Paths are relative to the manifest's directory. Throws IoError when the
/// file or a referenced file is missing, SchemaError for malformed records.
/// `expected_context_length` (if >= 0) must match the header.
CorpusManifest load_manifest(const fs::path& path, int expected_context_length = -1);
void write_manifest(const CorpusManifest& manifest, const fs::path& path);
/// Parse without touching referenced files.
CorpusManifest parse_manifest(const std::string& text, const fs::path& root);

TemporalSample load_sample(const CorpusManifest& manifest, std::size_t index);

// Image files. Frames are 8-bit RGB PNG; masks and zones are single-channel PNG
// holding raw values.
Frame read_frame(const fs::path& path, std::string sequence_id = {}, int frame_index = 0);
void write_frame(const Frame& frame, const fs::path& path);
SegmentationMask read_mask(const fs::path& path);
void write_mask(const SegmentationMask& mask, const fs::path& path);
ZoneMask read_zone(const fs::path& path);
void write_zone(const ZoneMask& zone, const fs::path& path);

/// Annotation file: JSON object {"version":1,"mask":<png>,"danger_zone":<png|null>,
/// "obstacle_boxes":[[x0,y0,x1,y1],...],"water_edge":[[x,y],...]}, image paths
/// relative to the annotation file.
FrameAnnotation read_annotation(const fs::path& path);
void write_annotation(const FrameAnnotation& ann, const fs::path& path);

/// Danger zone as the bottom `fraction` of the image rows.
ZoneMask bottom_band_zone(int height, int width, double fraction);

/// Non-normative helper: rasterize a danger zone of `radius_m` metres around
/// the camera under a flat-water pinhole model (camera height above water,
/// downward pitch, vertical field of view). Rows whose ground distance is at
/// most radius_m are marked.
struct PlanarCamera {
    double height_m = 1.0;
    double pitch_rad = 0.0;
    double vertical_fov_rad = 0.8;
};
ZoneMask planar_danger_zone(int height, int width, const PlanarCamera& cam, double radius_m = 15.0);

}  // namespace wasrt
