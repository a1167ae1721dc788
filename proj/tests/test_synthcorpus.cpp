#include <doctest.h>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "wasrt/errors.hpp"
#include "wasrt/synthcorpus.hpp"

using namespace wasrt;

namespace {

ZoneMask minus(const ZoneMask& a, const ZoneMask& b) {
    ZoneMask out = a;
    for (std::size_t i = 0; i < out.cells.size(); ++i) out.cells[i] = a.cells[i] && !b.cells[i];
    return out;
}

long count(const ZoneMask& z) {
    long n = 0;
    for (auto v : z.cells) n += v != 0;
    return n;
}

}  // namespace

TEST_CASE("synthcorpus: generation is deterministic in the seed") {
    const SceneSpec spec = random_scene(42, true, 32, 48, 4);
    const auto a = generate_sequence(spec);
    const auto b = generate_sequence(spec);
    REQUIRE(a.frames.size() == 4);
    for (std::size_t t = 0; t < a.frames.size(); ++t) {
        CHECK(a.frames[t].image == b.frames[t].image);
        CHECK(a.annotations[t] == b.annotations[t]);
    }
    CHECK(random_scene(42, true, 32, 48, 4) == spec);
    CHECK_FALSE(random_scene(43, true, 32, 48, 4) == spec);
}

TEST_CASE("synthcorpus: scene spec json round trip") {
    const SceneSpec spec = random_scene(7, true);
    nlohmann::json j = spec;
    CHECK(j.get<SceneSpec>() == spec);
    j["bogus"] = 1;
    CHECK_THROWS_AS(j.get<SceneSpec>(), ConfigError);
}

TEST_CASE("synthcorpus: invalid specs are rejected") {
    SceneSpec s;
    s.objects.push_back({});
    s.objects[0].x = 76;  // 8 wide in an 80-wide image
    s.objects[0].waterline = 30;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK_THROWS_AS(generate_sequence(s), ConfigError);

    SceneSpec above;
    above.objects.push_back({});
    above.objects[0].waterline = above.horizon - 1;
    CHECK_THROWS_AS(above.validate(), ConfigError);

    SceneSpec bad_len;
    bad_len.length = 0;
    CHECK_THROWS_AS(bad_len.validate(), ConfigError);

    SceneSpec bad_det;
    bad_det.detached.push_back({});
    bad_det.detached[0].y = 0;  // above the horizon
    CHECK_THROWS_AS(bad_det.validate(), ConfigError);
}

TEST_CASE("synthcorpus: ground truth matches the scene layout") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SceneSpec spec = random_scene(seed, seed % 2 == 1);
        const auto g = generate_sequence(spec);
        const FrameAnnotation& ann = g.annotations.front();
        CHECK_NOTHROW(ann.validate());
        for (const auto& a : g.annotations) CHECK(a == ann);
        CHECK(ann.obstacle_boxes.size() == spec.objects.size());

        // boxes are tight around obstacle pixels of the object region
        for (const Box& b : ann.obstacle_boxes) {
            CHECK(b.x0 >= 0);
            CHECK(b.y0 >= 0);
            CHECK(b.x1 <= spec.width);
            CHECK(b.y1 <= spec.height);
            bool top = false, bottom = false, left = false, right = false;
            for (int y = b.y0; y < b.y1; ++y)
                for (int x = b.x0; x < b.x1; ++x)
                    if (g.object_region(y, x)) {
                        top = top || y == b.y0;
                        bottom = bottom || y == b.y1 - 1;
                        left = left || x == b.x0;
                        right = right || x == b.x1 - 1;
                    }
            CHECK((top && bottom && left && right));
        }

        // reflections are water unless an obstacle covers them
        const ZoneMask refl_only = minus(g.reflection_region, g.object_region);
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                if (refl_only(y, x)) CHECK(ann.mask.is(y, x, Label::water));
                if (g.object_region(y, x)) CHECK(ann.mask.is(y, x, Label::obstacle));
            }

        // water edge only in columns free of floating obstacles
        for (const Point& p : ann.water_edge) {
            CHECK(p.y == spec.horizon);
            for (int y = 0; y < spec.height; ++y) CHECK(g.object_region(y, p.x) == 0);
        }
    }
}

TEST_CASE("synthcorpus: reflections vary more over time than obstacles") {
    double refl = 0, obj = 0;
    int used = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto g = generate_sequence(random_scene(500 + seed, true));
        const ZoneMask r = minus(g.reflection_region, g.object_region);
        if (count(r) == 0 || count(g.object_region) == 0) continue;
        const double vr = mean_temporal_variance(g.frames, r);
        const double vo = mean_temporal_variance(g.frames, g.object_region);
        CHECK(vr > vo);
        refl += vr;
        obj += vo;
        ++used;
    }
    REQUIRE(used >= 15);
    CHECK(refl > 5 * obj);
}

TEST_CASE("synthcorpus: emitted corpus loads back as the in-memory corpus") {
    const auto dir = testing::scratch_dir("synth_emit");
    const std::vector<SceneSpec> specs{random_scene(1, false, 24, 32, 6), random_scene(2, true, 24, 32, 6)};
    EmitOptions opts;
    opts.context_length = 3;
    const CorpusManifest m = emit_corpus(specs, dir, opts);
    const InMemoryCorpus mem = build_corpus(specs, opts);

    CHECK(m.context_length == 3);
    REQUIRE(m.entries.size() == 6);  // frames 3..5 of each scene
    REQUIRE(mem.samples.size() == m.entries.size());
    CHECK(m.count(Subset::base) == 3);
    CHECK(m.count(Subset::extension) == 3);

    const CorpusManifest reread = load_manifest(dir / "manifest.jsonl", 3);
    CHECK(reread == m);
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        const TemporalSample disk = load_sample(reread, i);
        const TemporalSample& ram = mem.samples[i];
        CHECK(mem.subsets[i] == m.entries[i].subset);
        CHECK(disk.target.sequence_id == ram.target.sequence_id);
        CHECK(disk.target.frame_index == ram.target.frame_index);
        CHECK(disk.target.image == ram.target.image);
        REQUIRE(disk.context.size() == ram.context.size());
        for (std::size_t k = 0; k < disk.context.size(); ++k) {
            CHECK(disk.context[k].frame_index == ram.context[k].frame_index);
            CHECK(disk.context[k].image == ram.context[k].image);
        }
        REQUIRE(disk.annotation.has_value());
        CHECK(*disk.annotation == *ram.annotation);
    }
}

TEST_CASE("synthcorpus: emit options") {
    const std::vector<SceneSpec> specs{random_scene(3, false, 16, 24, 5)};
    EmitOptions opts;
    opts.context_length = 2;
    opts.pad_sequence_start = true;
    CHECK(build_corpus(specs, opts).samples.size() == 5);
    opts.pad_sequence_start = false;
    CHECK(build_corpus(specs, opts).samples.size() == 3);
    opts.max_entries_per_sequence = 1;
    const auto one = build_corpus(specs, opts);
    REQUIRE(one.samples.size() == 1);
    CHECK(one.samples[0].target.frame_index == 4);
}

TEST_CASE("synthcorpus: recipe spreads heavy scenes evenly") {
    CorpusRecipe r;
    r.sequences = 10;
    r.heavy_fraction = 0.5;
    const auto specs = recipe_scenes(r);
    REQUIRE(specs.size() == 10);
    int heavy = 0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        CHECK(specs[i].seed == r.seed + i);
        CHECK(specs[i].reflection_heavy == (i % 2 == 1));
        heavy += specs[i].reflection_heavy;
    }
    CHECK(heavy == 5);

    r.heavy_fraction = 0;
    for (const auto& s : recipe_scenes(r)) CHECK_FALSE(s.reflection_heavy);
    r.heavy_fraction = 1;
    for (const auto& s : recipe_scenes(r)) CHECK(s.reflection_heavy);

    nlohmann::json j = CorpusRecipe{};
    j["sequences"] = 3;
    CHECK(j.get<CorpusRecipe>().sequences == 3);
    j["extra"] = true;
    CHECK_THROWS_AS(j.get<CorpusRecipe>(), ConfigError);
}
