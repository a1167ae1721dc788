#include "wasrt/datamodel.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "wasrt/errors.hpp"

namespace wasrt {

using nlohmann::json;

void Frame::validate() const {
    if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) <= 0 || image.dim(2) <= 0)
        throw DataError("frame " + sequence_id + "#" + std::to_string(frame_index) + " must be 3xHxW, got " +
                        shape_string(image.shape()));
    for (Real v : image.values())
        if (!std::isfinite(v) || v < 0 || v > 1)
            throw DataError("frame " + sequence_id + "#" + std::to_string(frame_index) +
                            " has a pixel outside [0,1]");
}

void SegmentationMask::validate() const {
    for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i] >= kNumClasses)
            throw DataError("mask label " + std::to_string(cells[i]) + " at pixel (" +
                            std::to_string(i % static_cast<std::size_t>(width)) + "," +
                            std::to_string(i / static_cast<std::size_t>(width)) + ") outside {0,1,2}");
}

void FrameAnnotation::validate() const {
    mask.validate();
    for (const Box& b : obstacle_boxes)
        if (b.x0 < 0 || b.y0 < 0 || b.x1 > mask.width || b.y1 > mask.height || b.x0 >= b.x1 || b.y0 >= b.y1)
            throw DataError("obstacle box (" + std::to_string(b.x0) + "," + std::to_string(b.y0) + "," +
                            std::to_string(b.x1) + "," + std::to_string(b.y1) + ") invalid for " +
                            std::to_string(mask.width) + "x" + std::to_string(mask.height) + " image");
    if (!danger_zone.cells.empty() && !danger_zone.same_size(mask))
        throw DataError("danger zone size differs from mask size");
}

std::string to_string(Subset s) { return s == Subset::base ? "base" : "extension"; }

Subset subset_from_string(const std::string& s) {
    if (s == "base") return Subset::base;
    if (s == "extension") return Subset::extension;
    throw SchemaError("unknown subset tag '" + s + "'");
}

std::size_t CorpusManifest::count(Subset s) const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.subset == s;
    return n;
}

std::vector<std::size_t> CorpusManifest::indices(Subset s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].subset == s) out.push_back(i);
    return out;
}

// ---------------------------------------------------------------- manifest

CorpusManifest parse_manifest(const std::string& text, const fs::path& root) {
    CorpusManifest m;
    m.root = root;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            if (!have_header) {
                if (rec.value("format", "") != "wasrt-manifest")
                    throw SchemaError("manifest line 1 is not a wasrt-manifest header");
                m.version = rec.at("version").get<int>();
                if (m.version != kManifestVersion)
                    throw SchemaError("unsupported manifest version " + std::to_string(m.version));
                m.context_length = rec.at("context_length").get<int>();
                if (m.context_length < 0) throw SchemaError("negative context_length in manifest header");
                have_header = true;
                continue;
            }
            ManifestEntry e;
            e.sequence_id = rec.at("sequence_id").get<std::string>();
            e.frame_index = rec.at("frame_index").get<int>();
            e.subset = subset_from_string(rec.at("subset").get<std::string>());
            e.target_path = rec.at("target").get<std::string>();
            e.context_paths = rec.at("context").get<std::vector<std::string>>();
            e.annotation_path = rec.at("annotation").get<std::string>();
            if (static_cast<int>(e.context_paths.size()) != m.context_length)
                throw SchemaError("manifest entry " + e.sequence_id + "#" + std::to_string(e.frame_index) +
                                  " (line " + std::to_string(line_no) + ") has " +
                                  std::to_string(e.context_paths.size()) + " context paths, expected " +
                                  std::to_string(m.context_length));
            m.entries.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw SchemaError("manifest line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    if (!have_header) throw SchemaError("manifest is empty");
    return m;
}

CorpusManifest load_manifest(const fs::path& path, int expected_context_length) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest " + path.string());
    std::stringstream buf;
    buf << f.rdbuf();
    CorpusManifest m = parse_manifest(buf.str(), path.parent_path());
    if (expected_context_length >= 0 && m.context_length != expected_context_length)
        throw SchemaError("manifest " + path.string() + " has context_length " + std::to_string(m.context_length) +
                          ", expected " + std::to_string(expected_context_length));
    auto require = [&](const std::string& rel, const ManifestEntry& e) {
        if (!fs::exists(m.root / rel))
            throw IoError("manifest entry " + e.sequence_id + "#" + std::to_string(e.frame_index) +
                          " references missing file " + (m.root / rel).string());
    };
    for (const auto& e : m.entries) {
        require(e.target_path, e);
        for (const auto& c : e.context_paths) require(c, e);
        require(e.annotation_path, e);
    }
    return m;
}

void write_manifest(const CorpusManifest& manifest, const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write manifest " + path.string());
    nlohmann::ordered_json header;
    header["format"] = "wasrt-manifest";
    header["version"] = manifest.version;
    header["context_length"] = manifest.context_length;
    f << header.dump() << '\n';
    for (const auto& e : manifest.entries) {
        nlohmann::ordered_json rec;
        rec["sequence_id"] = e.sequence_id;
        rec["frame_index"] = e.frame_index;
        rec["subset"] = to_string(e.subset);
        rec["target"] = e.target_path;
        rec["context"] = e.context_paths;
        rec["annotation"] = e.annotation_path;
        f << rec.dump() << '\n';
    }
    if (!f) throw IoError("failed writing manifest " + path.string());
}

TemporalSample load_sample(const CorpusManifest& manifest, std::size_t index) {
    if (index >= manifest.entries.size())
        throw std::out_of_range("sample index " + std::to_string(index) + " out of range (" +
                                std::to_string(manifest.entries.size()) + " entries)");
    const ManifestEntry& e = manifest.entries[index];
    TemporalSample s;
    s.target = read_frame(manifest.root / e.target_path, e.sequence_id, e.frame_index);
    const int T = static_cast<int>(e.context_paths.size());
    s.context.reserve(e.context_paths.size());
    for (int i = 0; i < T; ++i) {
        // Sequences are indexed from 0; padded slots carry the earliest index.
        const int idx = std::max(0, e.frame_index - T + i);
        Frame f = read_frame(manifest.root / e.context_paths[static_cast<std::size_t>(i)], e.sequence_id, idx);
        if (f.image.shape() != s.target.image.shape())
            throw DataError("context frame " + e.context_paths[static_cast<std::size_t>(i)] +
                            " size differs from target in sequence " + e.sequence_id);
        s.context.push_back(std::move(f));
    }
    FrameAnnotation ann = read_annotation(manifest.root / e.annotation_path);
    if (ann.mask.height != s.target.height() || ann.mask.width != s.target.width())
        throw DataError("annotation " + e.annotation_path + " size differs from its frame");
    s.annotation = std::move(ann);
    return s;
}

// ------------------------------------------------------------------ images

namespace {

cv::Mat imread_checked(const fs::path& path, int flags) {
    if (!fs::exists(path)) throw IoError("missing image file " + path.string());
    cv::Mat m = cv::imread(path.string(), flags);
    if (m.empty()) throw IoError("cannot decode image " + path.string());
    return m;
}

void imwrite_checked(const fs::path& path, const cv::Mat& m) {
    bool ok = false;
    try {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        ok = cv::imwrite(path.string(), m);
    } catch (const std::exception& e) {
        throw IoError("cannot write image " + path.string() + ": " + e.what());
    }
    if (!ok) throw IoError("cannot write image " + path.string());
}

Grid read_grid(const fs::path& path) {
    cv::Mat m = imread_checked(path, cv::IMREAD_UNCHANGED);
    if (m.channels() != 1 || m.depth() != CV_8U)
        throw DataError("expected single-channel 8-bit image in " + path.string());
    Grid g(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) g(y, x) = m.at<std::uint8_t>(y, x);
    return g;
}

void write_grid(const Grid& g, const fs::path& path) {
    cv::Mat m(g.height, g.width, CV_8UC1);
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) m.at<std::uint8_t>(y, x) = g(y, x);
    imwrite_checked(path, m);
}

}  // namespace

Frame read_frame(const fs::path& path, std::string sequence_id, int frame_index) {
    cv::Mat bgr = imread_checked(path, cv::IMREAD_COLOR);
    Frame f;
    f.sequence_id = std::move(sequence_id);
    f.frame_index = frame_index;
    f.image = Tensor({3, bgr.rows, bgr.cols});
    for (int y = 0; y < bgr.rows; ++y)
        for (int x = 0; x < bgr.cols; ++x) {
            const auto px = bgr.at<cv::Vec3b>(y, x);
            for (int c = 0; c < 3; ++c) f.image.at(c, y, x) = px[2 - c] / Real{255};
        }
    return f;
}

void write_frame(const Frame& frame, const fs::path& path) {
    frame.validate();
    cv::Mat bgr(frame.height(), frame.width(), CV_8UC3);
    for (int y = 0; y < frame.height(); ++y)
        for (int x = 0; x < frame.width(); ++x) {
            auto& px = bgr.at<cv::Vec3b>(y, x);
            for (int c = 0; c < 3; ++c)
                px[2 - c] = static_cast<std::uint8_t>(std::lround(frame.image.at(c, y, x) * 255));
        }
    imwrite_checked(path, bgr);
}

SegmentationMask read_mask(const fs::path& path) {
    SegmentationMask m;
    static_cast<Grid&>(m) = read_grid(path);
    m.validate();
    return m;
}

void write_mask(const SegmentationMask& mask, const fs::path& path) {
    mask.validate();
    write_grid(mask, path);
}

ZoneMask read_zone(const fs::path& path) { return read_grid(path); }

void write_zone(const ZoneMask& zone, const fs::path& path) { write_grid(zone, path); }

// ------------------------------------------------------------- annotations

FrameAnnotation read_annotation(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open annotation " + path.string());
    FrameAnnotation ann;
    const fs::path dir = path.parent_path();
    try {
        const json j = json::parse(f);
        ann.mask = read_mask(dir / j.at("mask").get<std::string>());
        if (j.contains("danger_zone") && !j["danger_zone"].is_null())
            ann.danger_zone = read_zone(dir / j["danger_zone"].get<std::string>());
        for (const auto& b : j.at("obstacle_boxes")) {
            const auto v = b.get<std::vector<int>>();
            if (v.size() != 4) throw SchemaError("obstacle box needs 4 coordinates in " + path.string());
            ann.obstacle_boxes.push_back({v[0], v[1], v[2], v[3]});
        }
        for (const auto& p : j.at("water_edge")) {
            const auto v = p.get<std::vector<int>>();
            if (v.size() != 2) throw SchemaError("water edge point needs 2 coordinates in " + path.string());
            ann.water_edge.push_back({v[0], v[1]});
        }
    } catch (const json::exception& e) {
        throw SchemaError("annotation " + path.string() + ": " + e.what());
    }
    ann.validate();
    return ann;
}

void write_annotation(const FrameAnnotation& ann, const fs::path& path) {
    ann.validate();
    const std::string stem = path.stem().string();
    const fs::path dir = path.parent_path();
    write_mask(ann.mask, dir / (stem + "_mask.png"));
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["mask"] = stem + "_mask.png";
    if (ann.danger_zone.cells.empty()) {
        j["danger_zone"] = nullptr;
    } else {
        write_zone(ann.danger_zone, dir / (stem + "_zone.png"));
        j["danger_zone"] = stem + "_zone.png";
    }
    j["obstacle_boxes"] = json::array();
    for (const Box& b : ann.obstacle_boxes) j["obstacle_boxes"].push_back({b.x0, b.y0, b.x1, b.y1});
    j["water_edge"] = json::array();
    for (const Point& p : ann.water_edge) j["water_edge"].push_back({p.x, p.y});
    std::ofstream f(path);
    if (!f) throw IoError("cannot write annotation " + path.string());
    f << j.dump() << '\n';
}

// ------------------------------------------------------------ danger zones

ZoneMask bottom_band_zone(int height, int width, double fraction) {
    ZoneMask z(height, width, 0);
    const int first = height - static_cast<int>(std::lround(fraction * height));
    for (int y = std::max(0, first); y < height; ++y)
        for (int x = 0; x < width; ++x) z(y, x) = 1;
    return z;
}

ZoneMask planar_danger_zone(int height, int width, const PlanarCamera& cam, double radius_m) {
    ZoneMask z(height, width, 0);
    const double focal = (height / 2.0) / std::tan(cam.vertical_fov_rad / 2.0);
    for (int y = 0; y < height; ++y) {
        // angle of the pixel-row ray below the horizontal
        const double below = cam.pitch_rad + std::atan((y + 0.5 - height / 2.0) / focal);
        if (below <= 0) continue;
        if (cam.height_m / std::tan(below) <= radius_m)
            for (int x = 0; x < width; ++x) z(y, x) = 1;
    }
    return z;
}

}  // namespace wasrt
