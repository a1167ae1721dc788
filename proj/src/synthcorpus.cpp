#include "wasrt/synthcorpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "wasrt/errors.hpp"

namespace wasrt {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    return std::mt19937_64(seq);
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
    return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

Rgb water_color(int y, int horizon, int height) {
    const double depth = static_cast<double>(y - horizon) / std::max(1, height - horizon);
    return {0.12 + 0.08 * depth, 0.28 + 0.10 * depth, 0.38 + 0.08 * depth};
}

/// Static ragged silhouette + striped colour for a sprite of size w x h.
struct Sprite {
    int width = 0, height = 0;
    std::vector<int> left, right;  // per-row insets
    SpriteLook look;

    Sprite(int w, int h, const SpriteLook& l) : width(w), height(h), left(h), right(h), look(l) {
        auto rng = stream(l.shape_seed, 0x5157);
        std::uniform_int_distribution<int> inset(0, std::max(0, l.ragged));
        for (int r = 0; r < h; ++r) {
            left[static_cast<std::size_t>(r)] = inset(rng);
            right[static_cast<std::size_t>(r)] = inset(rng);
        }
        // keep at least one full-width row so the bounding box is exact
        left[static_cast<std::size_t>(h - 1)] = 0;
        right[static_cast<std::size_t>(h - 1)] = 0;
        left[0] = 0;
        right[0] = 0;
    }

    bool inside(int r, int c) const {
        return r >= 0 && r < height && c >= left[static_cast<std::size_t>(r)] &&
               c < width - right[static_cast<std::size_t>(r)];
    }

    Rgb color(int r) const {
        const double m = 1 + look.stripe_contrast * std::sin(kTwoPi * r / look.stripe_period + look.stripe_phase);
        return {clamp01(look.color.r * m), clamp01(look.color.g * m), clamp01(look.color.b * m)};
    }
};

void put(Tensor& img, int y, int x, const Rgb& c) {
    img.at(0, y, x) = c.r;
    img.at(1, y, x) = c.g;
    img.at(2, y, x) = c.b;
}

Rgb get(const Tensor& img, int y, int x) { return {img.at(0, y, x), img.at(1, y, x), img.at(2, y, x)}; }

/// Per-row horizontal displacement of a reflection at frame t.
double warp(const ReflectionParams& p, double phase, int row, int t, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    return p.warp_amplitude * (std::sin(kTwoPi * (p.temporal_frequency * t + row / 5.0) + phase) + 0.6 * jitter(rng));
}

double ripple(const ReflectionParams& p, int row, int t, double frame_phase) {
    return 1 + p.ripple_contrast * std::sin(kTwoPi * (row / 3.3 + p.temporal_frequency * t) + frame_phase);
}

std::vector<int> shore_profile(const SceneSpec& s) {
    std::vector<int> top(static_cast<std::size_t>(s.width), s.horizon);
    if (s.shore_height <= 0) return top;
    auto rng = stream(s.seed, 0x5402E);
    std::uniform_real_distribution<double> u(0, kTwoPi);
    const double p1 = u(rng), p2 = u(rng);
    for (int x = 0; x < s.width; ++x) {
        const double v = s.shore_height * (1 + 0.5 * std::sin(kTwoPi * x / 37.0 + p1) + 0.3 * std::sin(kTwoPi * x / 13.0 + p2));
        top[static_cast<std::size_t>(x)] = std::clamp(s.horizon - static_cast<int>(std::lround(v)), 1, s.horizon);
    }
    return top;
}

}  // namespace

// ------------------------------------------------------------------- spec

void SceneSpec::validate() const {
    auto fail = [&](const std::string& what) { throw ConfigError("scene spec (seed " + std::to_string(seed) + "): " + what); };
    if (height <= 0 || width <= 0) fail("image size must be positive");
    if (length < 1) fail("sequence length must be >= 1");
    if (horizon < 1 || horizon >= height) fail("horizon row must lie inside the image");
    if (shore_height < 0) fail("shore height must be >= 0");
    if (danger_zone_fraction < 0 || danger_zone_fraction > 1) fail("danger zone fraction must lie in [0,1]");
    for (const auto& o : objects) {
        if (o.width < 2 || o.height < 2) fail("object smaller than 2x2");
        if (o.x < 0 || o.x + o.width > width || o.waterline - o.height < 0 || o.waterline > height)
            fail("object at x=" + std::to_string(o.x) + " waterline=" + std::to_string(o.waterline) +
                 " overflows the image");
        if (o.waterline < horizon) fail("object waterline above the horizon");
        if (o.look.stripe_period <= 0) fail("stripe period must be positive");
        if (2 * o.look.ragged >= o.width) fail("ragged inset too large for object width");
    }
    for (const auto& d : detached) {
        if (d.width < 2 || d.height < 2) fail("reflection smaller than 2x2");
        if (d.x < 0 || d.x + d.width > width || d.y < horizon || d.y + d.height > height)
            fail("detached reflection at x=" + std::to_string(d.x) + " y=" + std::to_string(d.y) +
                 " must lie inside the water region");
        if (d.look.stripe_period <= 0) fail("stripe period must be positive");
    }
}

// ------------------------------------------------------------------- json

namespace {

using nlohmann::json;

void only_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
    for (const auto& [key, value] : j.items())
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError(std::string("unknown ") + what + " key '" + key + "'");
}

json look_json(const SpriteLook& l) {
    return {{"color", {l.color.r, l.color.g, l.color.b}},
            {"stripe_period", l.stripe_period},
            {"stripe_phase", l.stripe_phase},
            {"stripe_contrast", l.stripe_contrast},
            {"ragged", l.ragged},
            {"shape_seed", l.shape_seed}};
}

SpriteLook look_from(const json& j) {
    only_keys(j, {"color", "stripe_period", "stripe_phase", "stripe_contrast", "ragged", "shape_seed"}, "sprite look");
    SpriteLook l;
    const auto c = j.at("color").get<std::vector<double>>();
    if (c.size() != 3) throw SchemaError("sprite colour needs 3 components");
    l.color = {c[0], c[1], c[2]};
    l.stripe_period = j.value("stripe_period", l.stripe_period);
    l.stripe_phase = j.value("stripe_phase", l.stripe_phase);
    l.stripe_contrast = j.value("stripe_contrast", l.stripe_contrast);
    l.ragged = j.value("ragged", l.ragged);
    l.shape_seed = j.value("shape_seed", l.shape_seed);
    return l;
}

}  // namespace

void to_json(json& j, const SceneSpec& s) {
    j = json{{"seed", s.seed},
             {"height", s.height},
             {"width", s.width},
             {"horizon", s.horizon},
             {"shore_height", s.shore_height},
             {"length", s.length},
             {"reflection_heavy", s.reflection_heavy},
             {"danger_zone_fraction", s.danger_zone_fraction},
             {"reflection",
              {{"warp_amplitude", s.reflection.warp_amplitude},
               {"temporal_frequency", s.reflection.temporal_frequency},
               {"ripple_contrast", s.reflection.ripple_contrast}}},
             {"glitter",
              {{"density", s.glitter.density},
               {"flicker_rate", s.glitter.flicker_rate},
               {"band_x", s.glitter.band_x},
               {"band_width", s.glitter.band_width}}}};
    j["objects"] = json::array();
    for (const auto& o : s.objects)
        j["objects"].push_back({{"x", o.x},
                                {"waterline", o.waterline},
                                {"width", o.width},
                                {"height", o.height},
                                {"reflected", o.reflected},
                                {"reflection_alpha", o.reflection_alpha},
                                {"look", look_json(o.look)}});
    j["detached"] = json::array();
    for (const auto& d : s.detached)
        j["detached"].push_back({{"x", d.x},
                                 {"y", d.y},
                                 {"width", d.width},
                                 {"height", d.height},
                                 {"alpha", d.alpha},
                                 {"look", look_json(d.look)}});
}

void from_json(const json& j, SceneSpec& s) {
    only_keys(j,
              {"seed", "height", "width", "horizon", "shore_height", "length", "reflection_heavy",
               "danger_zone_fraction", "reflection", "glitter", "objects", "detached"},
              "scene");
    s = SceneSpec{};
    s.seed = j.value("seed", s.seed);
    s.height = j.value("height", s.height);
    s.width = j.value("width", s.width);
    s.horizon = j.value("horizon", s.horizon);
    s.shore_height = j.value("shore_height", s.shore_height);
    s.length = j.value("length", s.length);
    s.reflection_heavy = j.value("reflection_heavy", s.reflection_heavy);
    s.danger_zone_fraction = j.value("danger_zone_fraction", s.danger_zone_fraction);
    if (j.contains("reflection")) {
        const auto& r = j["reflection"];
        only_keys(r, {"warp_amplitude", "temporal_frequency", "ripple_contrast"}, "reflection");
        s.reflection.warp_amplitude = r.value("warp_amplitude", s.reflection.warp_amplitude);
        s.reflection.temporal_frequency = r.value("temporal_frequency", s.reflection.temporal_frequency);
        s.reflection.ripple_contrast = r.value("ripple_contrast", s.reflection.ripple_contrast);
    }
    if (j.contains("glitter")) {
        const auto& g = j["glitter"];
        only_keys(g, {"density", "flicker_rate", "band_x", "band_width"}, "glitter");
        s.glitter.density = g.value("density", s.glitter.density);
        s.glitter.flicker_rate = g.value("flicker_rate", s.glitter.flicker_rate);
        s.glitter.band_x = g.value("band_x", s.glitter.band_x);
        s.glitter.band_width = g.value("band_width", s.glitter.band_width);
    }
    for (const auto& o : j.value("objects", json::array())) {
        only_keys(o, {"x", "waterline", "width", "height", "reflected", "reflection_alpha", "look"}, "object");
        FloatingObject f;
        f.x = o.at("x").get<int>();
        f.waterline = o.at("waterline").get<int>();
        f.width = o.at("width").get<int>();
        f.height = o.at("height").get<int>();
        f.reflected = o.value("reflected", f.reflected);
        f.reflection_alpha = o.value("reflection_alpha", f.reflection_alpha);
        f.look = look_from(o.at("look"));
        s.objects.push_back(f);
    }
    for (const auto& o : j.value("detached", json::array())) {
        only_keys(o, {"x", "y", "width", "height", "alpha", "look"}, "detached reflection");
        DetachedReflection d;
        d.x = o.at("x").get<int>();
        d.y = o.at("y").get<int>();
        d.width = o.at("width").get<int>();
        d.height = o.at("height").get<int>();
        d.alpha = o.value("alpha", d.alpha);
        d.look = look_from(o.at("look"));
        s.detached.push_back(d);
    }
}

// ----------------------------------------------------------- random scene

SceneSpec random_scene(std::uint64_t seed, bool reflection_heavy, int height, int width, int length) {
    auto rng = stream(seed, 0x5CE7E);
    auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    auto irange = [&](int a, int b) { return std::uniform_int_distribution<int>(a, std::max(a, b))(rng); };

    SceneSpec s;
    s.seed = seed;
    s.height = height;
    s.width = width;
    s.length = length;
    s.reflection_heavy = reflection_heavy;
    s.horizon = irange(height / 4, height * 3 / 8);
    s.shore_height = irange(0, height / 8);

    auto random_look = [&](int row_hint) {
        SpriteLook l;
        // saturated random colour pulled partly toward the local water colour
        const double hue = uni(0, 1), val = uni(0.35, 0.95), sat = uni(0.3, 0.9);
        const double hx = hue * 6;
        const int sector = static_cast<int>(hx) % 6;
        const double f = hx - std::floor(hx);
        const double p = val * (1 - sat), q = val * (1 - sat * f), t = val * (1 - sat * (1 - f));
        const Rgb rgb[6] = {{val, t, p}, {q, val, p}, {p, val, t}, {p, q, val}, {t, p, val}, {val, p, q}};
        l.color = lerp(rgb[sector], water_color(row_hint, s.horizon, height), uni(0.0, 0.25));
        l.stripe_period = uni(2.5, 4.5);
        l.stripe_phase = uni(0, kTwoPi);
        l.stripe_contrast = uni(0.15, 0.35);
        l.ragged = irange(0, 2);
        l.shape_seed = rng();
        return l;
    };

    std::vector<Box> occupied;  // object bodies + reflections, with a margin
    auto free = [&](const Box& b) {
        for (const Box& o : occupied)
            if (b.x0 < o.x1 && o.x0 < b.x1 && b.y0 < o.y1 && o.y0 < b.y1) return false;
        return true;
    };

    const int n_objects = reflection_heavy ? irange(1, 2) : irange(1, 3);
    for (int i = 0, tries = 0; i < n_objects && tries < 200; ++tries) {
        FloatingObject o;
        o.width = irange(6, 14);
        o.height = irange(5, 10);
        o.waterline = irange(s.horizon + 3, height - 1);
        if (o.waterline - o.height < 0) continue;
        o.x = irange(0, width - o.width);
        o.reflected = uni(0, 1) < 0.5;
        o.reflection_alpha = uni(0.75, 0.95);
        const int refl = o.reflected ? o.height : 0;
        const Box area{o.x - 2, o.waterline - o.height - 2, o.x + o.width + 2, o.waterline + refl + 2};
        if (!free(area)) continue;
        o.look = random_look(o.waterline);
        o.look.ragged = std::min(o.look.ragged, (o.width - 1) / 2);
        occupied.push_back(area);
        s.objects.push_back(o);
        ++i;
    }

    const int n_detached = reflection_heavy ? irange(2, 4) : (uni(0, 1) < 0.3 ? 1 : 0);
    for (int i = 0, tries = 0; i < n_detached && tries < 200; ++tries) {
        DetachedReflection d;
        d.width = irange(6, 14);
        d.height = irange(5, 10);
        d.y = irange(s.horizon + 1, height - d.height);
        d.x = irange(0, width - d.width);
        const Box area{d.x - 2, d.y - 2, d.x + d.width + 2, d.y + d.height + 2};
        if (d.y + d.height > height || !free(area)) continue;
        d.alpha = uni(0.8, 0.95);
        d.look = random_look(d.y);
        occupied.push_back(area);
        s.detached.push_back(d);
        ++i;
    }

    s.reflection.warp_amplitude = reflection_heavy ? uni(1.5, 3.0) : uni(1.0, 2.5);
    s.reflection.temporal_frequency = uni(0.2, 0.45);
    s.reflection.ripple_contrast = reflection_heavy ? uni(0.2, 0.35) : uni(0.15, 0.3);
    s.glitter.density = reflection_heavy ? uni(0.03, 0.08) : uni(0.0, 0.02);
    s.glitter.flicker_rate = uni(0.7, 1.0);
    s.glitter.band_width = irange(width / 5, width / 2);
    s.glitter.band_x = irange(0, width - s.glitter.band_width);
    s.validate();
    return s;
}

// --------------------------------------------------------------- rendering

GeneratedSequence generate_sequence(const SceneSpec& spec) {
    spec.validate();
    const int H = spec.height, W = spec.width;
    GeneratedSequence out;
    out.reflection_region = ZoneMask(H, W, 0);
    out.object_region = ZoneMask(H, W, 0);

    const std::vector<int> shore_top = shore_profile(spec);
    std::vector<Sprite> object_sprites, detached_sprites;
    for (const auto& o : spec.objects) object_sprites.emplace_back(o.width, o.height, o.look);
    for (const auto& d : spec.detached) detached_sprites.emplace_back(d.width, d.height, d.look);

    // static land texture and reflection phases
    auto static_rng = stream(spec.seed, 0x57A71C);
    std::uniform_real_distribution<double> unit(0, 1);
    std::vector<double> land(static_cast<std::size_t>(H) * W);
    for (double& v : land) v = unit(static_rng);
    const double warp_phase = unit(static_rng) * kTwoPi;

    // ground truth shared by all frames
    FrameAnnotation ann;
    ann.mask = SegmentationMask(H, W, Label::water);
    for (int x = 0; x < W; ++x)
        for (int y = 0; y < spec.horizon; ++y)
            ann.mask(y, x) = static_cast<std::uint8_t>(y < shore_top[static_cast<std::size_t>(x)] ? Label::sky : Label::obstacle);
    std::vector<bool> column_occluded(static_cast<std::size_t>(W), false);
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
        const auto& o = spec.objects[i];
        const Sprite& sp = object_sprites[i];
        Box box{W, H, 0, 0};
        for (int r = 0; r < o.height; ++r)
            for (int c = 0; c < o.width; ++c) {
                if (!sp.inside(r, c)) continue;
                const int y = o.waterline - o.height + r, x = o.x + c;
                ann.mask(y, x) = static_cast<std::uint8_t>(Label::obstacle);
                out.object_region(y, x) = 1;
                box = {std::min(box.x0, x), std::min(box.y0, y), std::max(box.x1, x + 1), std::max(box.y1, y + 1)};
                column_occluded[static_cast<std::size_t>(x)] = true;
            }
        ann.obstacle_boxes.push_back(box);
    }
    for (int x = 0; x < W; ++x)
        if (!column_occluded[static_cast<std::size_t>(x)]) ann.water_edge.push_back({x, spec.horizon});
    ann.danger_zone = bottom_band_zone(H, W, spec.danger_zone_fraction);

    // glitter state persists between frames unless re-drawn
    const int band_x0 = spec.glitter.band_width > 0 ? spec.glitter.band_x : 0;
    const int band_x1 = spec.glitter.band_width > 0 ? std::min(W, spec.glitter.band_x + spec.glitter.band_width) : W;
    std::vector<std::uint8_t> glitter(static_cast<std::size_t>(H) * W, 0);

    for (int t = 0; t < spec.length; ++t) {
        auto rng = stream(spec.seed, 0xF4A3E, static_cast<std::uint64_t>(t));
        Tensor img({3, H, W});

        // sky, land, water
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                Rgb c;
                if (y < shore_top[static_cast<std::size_t>(x)]) {
                    const double g = static_cast<double>(y) / spec.horizon;
                    c = {0.55 + 0.25 * g, 0.70 + 0.15 * g, 0.90};
                } else if (y < spec.horizon) {
                    const double n = land[static_cast<std::size_t>(y) * W + x];
                    c = {0.25 + 0.15 * n, 0.30 + 0.15 * n, 0.18 + 0.08 * n};
                } else {
                    c = water_color(y, spec.horizon, H);
                    const double rip = 0.025 * std::sin(kTwoPi * (x / 9.0 + y / 4.0 + 0.2 * t));
                    c = {c.r + rip, c.g + rip, c.b + rip};
                }
                put(img, y, x, c);
            }

        const double frame_phase = unit(rng) * kTwoPi;

        // reflections of floating objects, mirrored below the waterline
        for (std::size_t i = 0; i < spec.objects.size(); ++i) {
            const auto& o = spec.objects[i];
            if (!o.reflected) continue;
            const Sprite& sp = object_sprites[i];
            const double alpha = o.reflection_alpha * (1 + 0.1 * (2 * unit(rng) - 1));
            for (int k = 0; k < o.height && o.waterline + k < H; ++k) {
                const int y = o.waterline + k, r = o.height - 1 - k;
                const int shift = static_cast<int>(std::lround(warp(spec.reflection, warp_phase, y, t, rng)));
                const double mod = ripple(spec.reflection, y, t, frame_phase);
                for (int x = 0; x < W; ++x) {
                    const int c = x - o.x - shift;
                    if (!sp.inside(r, c)) continue;
                    Rgb src = sp.color(r);
                    src = {clamp01(src.r * mod), clamp01(src.g * mod), clamp01(src.b * mod)};
                    put(img, y, x, lerp(get(img, y, x), src, alpha));
                    out.reflection_region(y, x) = 1;
                }
            }
        }

        // reflections whose source is outside the image
        for (std::size_t i = 0; i < spec.detached.size(); ++i) {
            const auto& d = spec.detached[i];
            const Sprite& sp = detached_sprites[i];
            const double alpha = d.alpha * (1 + 0.1 * (2 * unit(rng) - 1));
            for (int k = 0; k < d.height; ++k) {
                const int y = d.y + k, r = d.height - 1 - k;
                const int shift = static_cast<int>(std::lround(warp(spec.reflection, warp_phase, y, t, rng)));
                const double mod = ripple(spec.reflection, y, t, frame_phase);
                for (int x = 0; x < W; ++x) {
                    const int c = x - d.x - shift;
                    if (!sp.inside(r, c)) continue;
                    Rgb src = sp.color(r);
                    src = {clamp01(src.r * mod), clamp01(src.g * mod), clamp01(src.b * mod)};
                    put(img, y, x, lerp(get(img, y, x), src, alpha));
                    out.reflection_region(y, x) = 1;
                }
            }
        }

        // glitter specks in the sun band
        for (int y = spec.horizon; y < H; ++y)
            for (int x = band_x0; x < band_x1; ++x) {
                auto& g = glitter[static_cast<std::size_t>(y) * W + x];
                if (t == 0 || unit(rng) < spec.glitter.flicker_rate) g = unit(rng) < spec.glitter.density;
                if (g) {
                    const double v = 0.85 + 0.15 * unit(rng);
                    put(img, y, x, {v, v, v * 0.95});
                }
            }

        // opaque floating objects
        for (std::size_t i = 0; i < spec.objects.size(); ++i) {
            const auto& o = spec.objects[i];
            const Sprite& sp = object_sprites[i];
            for (int r = 0; r < o.height; ++r)
                for (int c = 0; c < o.width; ++c)
                    if (sp.inside(r, c)) put(img, o.waterline - o.height + r, o.x + c, sp.color(r));
        }

        // sensor noise, then 8-bit quantization so files and memory agree
        std::normal_distribution<double> noise(0.0, 0.01);
        for (Real& v : img.values()) v = std::lround(clamp01(v + noise(rng)) * 255) / 255.0;

        char id[32];
        std::snprintf(id, sizeof id, "seq_%08llx", static_cast<unsigned long long>(spec.seed));
        out.frames.push_back(Frame{std::move(img), id, t});
        out.annotations.push_back(ann);
    }
    // reflections never count as object pixels
    for (std::size_t i = 0; i < out.reflection_region.cells.size(); ++i)
        if (out.object_region.cells[i]) out.reflection_region.cells[i] = 0;
    return out;
}

// ------------------------------------------------------------------ corpus

namespace {

std::vector<int> entry_frames(int length, const EmitOptions& opts) {
    std::vector<int> frames;
    for (int f = 0; f < length; ++f)
        if (opts.pad_sequence_start || f >= opts.context_length) frames.push_back(f);
    if (opts.max_entries_per_sequence > 0 && static_cast<int>(frames.size()) > opts.max_entries_per_sequence)
        frames.erase(frames.begin(), frames.end() - opts.max_entries_per_sequence);
    return frames;
}

std::string frame_name(int f, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04d%s", f, ext);
    return buf;
}

}  // namespace

CorpusManifest emit_corpus(const std::vector<SceneSpec>& specs, const fs::path& out_dir, const EmitOptions& opts) {
    if (specs.empty()) throw ConfigError("emit_corpus: empty scene list");
    if (opts.context_length < 0) throw ConfigError("emit_corpus: negative context length");
    CorpusManifest m;
    m.context_length = opts.context_length;
    m.root = out_dir;
    try {
        fs::create_directories(out_dir);
    } catch (const fs::filesystem_error& e) {
        throw IoError(std::string("cannot create corpus directory: ") + e.what());
    }
    for (std::size_t si = 0; si < specs.size(); ++si) {
        const GeneratedSequence seq = generate_sequence(specs[si]);
        char dir[32];
        std::snprintf(dir, sizeof dir, "seq_%04zu", si);
        const fs::path seq_dir = out_dir / dir;
        for (std::size_t f = 0; f < seq.frames.size(); ++f) {
            write_frame(seq.frames[f], seq_dir / frame_name(static_cast<int>(f), ".png"));
            write_annotation(seq.annotations[f], seq_dir / frame_name(static_cast<int>(f), ".json"));
        }
        for (int f : entry_frames(specs[si].length, opts)) {
            ManifestEntry e;
            e.sequence_id = dir;
            e.frame_index = f;
            e.subset = specs[si].reflection_heavy ? Subset::extension : Subset::base;
            e.target_path = (fs::path(dir) / frame_name(f, ".png")).generic_string();
            for (int i = 0; i < opts.context_length; ++i)
                e.context_paths.push_back(
                    (fs::path(dir) / frame_name(std::max(0, f - opts.context_length + i), ".png")).generic_string());
            e.annotation_path = (fs::path(dir) / frame_name(f, ".json")).generic_string();
            m.entries.push_back(std::move(e));
        }
    }
    write_manifest(m, out_dir / "manifest.jsonl");
    return m;
}

InMemoryCorpus build_corpus(const std::vector<SceneSpec>& specs, const EmitOptions& opts) {
    if (specs.empty()) throw ConfigError("build_corpus: empty scene list");
    InMemoryCorpus c;
    for (std::size_t si = 0; si < specs.size(); ++si) {
        const SceneSpec& spec = specs[si];
        GeneratedSequence seq = generate_sequence(spec);
        char dir[32];
        std::snprintf(dir, sizeof dir, "seq_%04zu", si);
        for (Frame& fr : seq.frames) fr.sequence_id = dir;
        for (int f : entry_frames(spec.length, opts)) {
            TemporalSample s;
            s.target = seq.frames[static_cast<std::size_t>(f)];
            for (int i = 0; i < opts.context_length; ++i)
                s.context.push_back(seq.frames[static_cast<std::size_t>(std::max(0, f - opts.context_length + i))]);
            s.annotation = seq.annotations[static_cast<std::size_t>(f)];
            c.samples.push_back(std::move(s));
            c.subsets.push_back(spec.reflection_heavy ? Subset::extension : Subset::base);
        }
    }
    return c;
}

std::vector<SceneSpec> recipe_scenes(const CorpusRecipe& r) {
    if (r.sequences < 1) throw ConfigError("corpus recipe needs at least one sequence");
    if (r.heavy_fraction < 0 || r.heavy_fraction > 1) throw ConfigError("heavy_fraction must lie in [0, 1]");
    std::vector<SceneSpec> specs;
    for (int i = 0; i < r.sequences; ++i) {
        // spreads the heavy scenes evenly: scene i is heavy when floor((i+1)f) > floor(i f)
        const bool heavy = std::floor((i + 1) * r.heavy_fraction) > std::floor(i * r.heavy_fraction);
        specs.push_back(random_scene(r.seed + static_cast<std::uint64_t>(i), heavy, r.height, r.width, r.length));
    }
    return specs;
}

void to_json(nlohmann::json& j, const CorpusRecipe& r) {
    j = {{"seed", r.seed},     {"sequences", r.sequences}, {"heavy_fraction", r.heavy_fraction},
         {"height", r.height}, {"width", r.width},         {"length", r.length}};
}

void from_json(const nlohmann::json& j, CorpusRecipe& r) {
    only_keys(j, {"seed", "sequences", "heavy_fraction", "height", "width", "length"}, "corpus recipe");
    r.seed = j.value("seed", r.seed);
    r.sequences = j.value("sequences", r.sequences);
    r.heavy_fraction = j.value("heavy_fraction", r.heavy_fraction);
    r.height = j.value("height", r.height);
    r.width = j.value("width", r.width);
    r.length = j.value("length", r.length);
}

double mean_temporal_variance(const std::vector<Frame>& frames, const ZoneMask& region) {
    if (frames.empty()) return 0;
    const int H = frames[0].height(), W = frames[0].width();
    const double n = static_cast<double>(frames.size());
    double total = 0;
    long count = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (!region(y, x)) continue;
            double var = 0;
            for (int c = 0; c < 3; ++c) {
                double s = 0, s2 = 0;
                for (const Frame& f : frames) {
                    s += f.image.at(c, y, x);
                    s2 += f.image.at(c, y, x) * f.image.at(c, y, x);
                }
                var += std::max(0.0, s2 / n - (s / n) * (s / n));
            }
            total += var / 3;
            ++count;
        }
    return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace wasrt
