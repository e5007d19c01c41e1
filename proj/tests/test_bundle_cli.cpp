#include "ckan/bundle.hpp"
#include "ckan/cli.hpp"
#include "ckan/csv.hpp"
#include "ckan/data.hpp"
#include "ckan/errors.hpp"
#include "ckan/kan.hpp"
#include "ckan/rng.hpp"
#include "ckan/spline.hpp"

#include "oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace ckan;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = "/tmp/ckan_bundle_cli_suite";

std::string path_of(const char* name) { return (kWork / name).string(); }

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"ckan"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(bool(out));
    out << content;
}

ModelBundle sample_bundle(bool with_head) {
    ModelBundle b;
    b.kind = DatasetKind::GenericCsv;
    b.label_override = "target";

    ColumnSpec num{"x0", ColumnKind::Numeric, {}};
    ColumnSpec cat{"tag", ColumnKind::Categorical, {"blue", "red"}};
    ColumnSpec lab{"target", ColumnKind::Label, {}};
    b.schema.columns = {num, cat, lab};
    b.schema.class_names = {"a", "b", "c"};

    b.scaler.mu = {0.25, 0.0, 1.0};
    b.scaler.sigma = {2.0, 1.0, 0.5};
    b.ratios = {0.7, 0.07};

    std::vector<KanLayer> layers;
    layers.emplace_back(3, 7, SplineGrid(2, 4));
    layers.emplace_back(7, 4, SplineGrid(2, 4));
    RngStream rng(1234);
    layers[0].init_parameters(rng);
    layers[1].init_parameters(rng);
    b.extractor = KanNetwork(std::move(layers));

    b.pretrain_cfg.batch_size = 32;
    b.pretrain_cfg.masking_fraction = 0.15;
    b.pretrain_cfg.temperature = 0.4;
    b.pretrain_cfg.epochs = 9;
    b.pretrain_cfg.learning_rate = 2e-3;
    b.pretrain_cfg.seed = 123;

    if (with_head) {
        b.has_head = true;
        b.head = KanLayer(4, 3, SplineGrid(2, 4));
        b.head.init_parameters(rng);
        b.finetune_cfg.batch_size = 8;
        b.finetune_cfg.epochs = 11;
        b.finetune_cfg.learning_rate = 3e-3;
        b.finetune_cfg.seed = 77;
    }
    return b;
}

void check_layer_equal(const KanLayer& got, const KanLayer& want) {
    CHECK(got.d_in() == want.d_in());
    CHECK(got.d_out() == want.d_out());
    CHECK(got.grid().order == want.grid().order);
    CHECK(got.grid().grid_size == want.grid().grid_size);
    CHECK(got.grid().range_min == want.grid().range_min);
    CHECK(got.grid().range_max == want.grid().range_max);
    CHECK(got.base_weight.data == want.base_weight.data); // bitwise
    CHECK(got.spline_scaler.data == want.spline_scaler.data);
    CHECK(got.spline_coeffs == want.spline_coeffs);
}

} // namespace

TEST_CASE("workdir setup") {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    CHECK(fs::is_directory(kWork));
}

TEST_CASE("fnv1a matches the published test vectors") {
    CHECK(fnv1a(nullptr, 0) == 14695981039346656037ULL);
    const unsigned char a[] = {'a'};
    CHECK(fnv1a(a, 1) == 0xaf63dc4c8601ec8cULL);
    const unsigned char foobar[] = {'f', 'o', 'o', 'b', 'a', 'r'};
    CHECK(fnv1a(foobar, 6) == 0x85944171f73967e8ULL);
}

TEST_CASE("bundle round-trip preserves every field bitwise") {
    const ModelBundle b = sample_bundle(true);
    const std::string path = path_of("roundtrip.bundle");
    save_bundle(path, b);
    const ModelBundle r = load_bundle(path);

    CHECK(r.format_version == kBundleFormatVersion);
    CHECK(r.kind == DatasetKind::GenericCsv);
    CHECK(r.label_override == "target");
    REQUIRE(r.schema.columns.size() == 3);
    CHECK(r.schema.columns[0].name == "x0");
    CHECK(r.schema.columns[0].kind == ColumnKind::Numeric);
    CHECK(r.schema.columns[1].vocabulary == std::vector<std::string>{"blue", "red"});
    CHECK(r.schema.columns[2].kind == ColumnKind::Label);
    CHECK(r.schema.class_names == std::vector<std::string>{"a", "b", "c"});
    CHECK(r.scaler.mu == b.scaler.mu);
    CHECK(r.scaler.sigma == b.scaler.sigma);
    CHECK(r.ratios.pretrain == 0.7);
    CHECK(r.ratios.finetune == 0.07);

    REQUIRE(r.extractor.depth() == 2);
    check_layer_equal(r.extractor.layer(0), b.extractor.layer(0));
    check_layer_equal(r.extractor.layer(1), b.extractor.layer(1));
    CHECK(r.extractor.parameter_checksum() == b.extractor.parameter_checksum());

    REQUIRE(r.has_head);
    check_layer_equal(r.head, b.head);

    CHECK(r.pretrain_cfg.batch_size == 32);
    CHECK(r.pretrain_cfg.masking_fraction == 0.15);
    CHECK(r.pretrain_cfg.temperature == 0.4);
    CHECK(r.pretrain_cfg.epochs == 9);
    CHECK(r.pretrain_cfg.learning_rate == 2e-3);
    CHECK(r.pretrain_cfg.seed == 123);
    CHECK(r.finetune_cfg.batch_size == 8);
    CHECK(r.finetune_cfg.epochs == 11);
    CHECK(r.finetune_cfg.learning_rate == 3e-3);
    CHECK(r.finetune_cfg.seed == 77);
}

TEST_CASE("save -> load -> save is byte-identical") {
    const ModelBundle b = sample_bundle(true);
    const std::string p1 = path_of("stable1.bundle");
    const std::string p2 = path_of("stable2.bundle");
    save_bundle(p1, b);
    save_bundle(p2, load_bundle(p1));
    CHECK(read_file(p1) == read_file(p2));
}

TEST_CASE("to_classifier requires a head and freezes the extractor") {
    const ModelBundle partial = sample_bundle(false);
    CHECK_THROWS_AS(partial.to_classifier(), StateError);

    const ModelBundle full = sample_bundle(true);
    const ClassifierModel model = full.to_classifier();
    CHECK(model.extractor.frozen());
    CHECK(model.class_names == std::vector<std::string>{"a", "b", "c"});
    CHECK(model.head.d_out() == 3);
}

TEST_CASE("load_bundle rejects damaged files") {
    const ModelBundle b = sample_bundle(true);
    const std::string good_path = path_of("good.bundle");
    save_bundle(good_path, b);
    const std::string good = read_file(good_path);

    CHECK_THROWS_AS(load_bundle(path_of("missing.bundle")), IoError);

    write_file(path_of("garbage.bundle"), "this is not a bundle at all\n");
    CHECK_THROWS_AS(load_bundle(path_of("garbage.bundle")), IoError);

    // Unsupported format version.
    std::string bumped = good;
    REQUIRE(bumped.rfind("CKANBUNDLE 1 ", 0) == 0);
    bumped[11] = '9';
    write_file(path_of("version.bundle"), bumped);
    CHECK_THROWS_WITH_AS(load_bundle(path_of("version.bundle")), doctest::Contains("version"),
                         IoError);

    // Truncated blob.
    write_file(path_of("short.bundle"), good.substr(0, good.size() - 16));
    CHECK_THROWS_AS(load_bundle(path_of("short.bundle")), IoError);

    // One flipped blob byte must trip the checksum.
    std::string flipped = good;
    flipped[flipped.size() - 1] = static_cast<char>(flipped[flipped.size() - 1] ^ 0x40);
    write_file(path_of("flip.bundle"), flipped);
    CHECK_THROWS_WITH_AS(load_bundle(path_of("flip.bundle")), doctest::Contains("checksum"),
                         IoError);
}

TEST_CASE("config file parsing and application") {
    const std::string cfg_path = path_of("run.cfg");
    write_file(cfg_path,
               "# comment line\n"
               "extractor_widths = 32,16\n"
               "grid_size = 7   # trailing comment\n"
               "spline_order = 2\n"
               "\n"
               "masking_fraction = 0.25\n"
               "pretrain_optimizer = sgd\n"
               "seed = 99\n");
    RunConfig cfg = preset_for(DatasetKind::GenericCsv);
    apply_kv(cfg, parse_kv_file(cfg_path));
    CHECK(cfg.extractor_widths == std::vector<std::size_t>{32, 16});
    CHECK(cfg.grid_size == 7);
    CHECK(cfg.spline_order == 2);
    CHECK(cfg.masking_fraction == 0.25);
    CHECK(cfg.pretrain_optimizer == OptimizerKind::SGD);
    CHECK(cfg.seed == 99);

    CHECK_THROWS_AS(parse_kv_file(path_of("nope.cfg")), IoError);
    write_file(path_of("bad.cfg"), "grid_size\n");
    CHECK_THROWS_WITH_AS(apply_kv(cfg, parse_kv_file(path_of("bad.cfg"))),
                         doctest::Contains("line 1"), ArgumentError);
    CHECK_THROWS_WITH_AS(apply_kv(cfg, {{"no_such_key", "1"}}), doctest::Contains("no_such_key"),
                         ArgumentError);
    CHECK_THROWS_AS(apply_kv(cfg, {{"grid_size", "five"}}), ArgumentError);
    CHECK_THROWS_AS(apply_kv(cfg, {{"scaling", "robust"}}), ArgumentError);
    CHECK_THROWS_AS(optimizer_kind_from_string("rmsprop"), ArgumentError);
}

TEST_CASE("dataset presets carry the published hyperparameters") {
    // [PAPER] architecture/grid/batch/masking per dataset.
    const RunConfig unsw = preset_for(DatasetKind::UnswNb15);
    CHECK(unsw.extractor_widths == std::vector<std::size_t>{50});
    CHECK(unsw.grid_size == 50);
    CHECK(unsw.spline_order == 1);
    CHECK(unsw.pretrain_batch_size == 64);
    CHECK(unsw.masking_fraction == 0.1);
    CHECK(unsw.finetune_batch_size == 64);

    const RunConfig bot = preset_for(DatasetKind::BotIot);
    CHECK(bot.extractor_widths == std::vector<std::size_t>{100});
    CHECK(bot.grid_size == 50);
    CHECK(bot.spline_order == 3);
    CHECK(bot.pretrain_batch_size == 16);
    CHECK(bot.masking_fraction == 0.2);
    CHECK(bot.finetune_batch_size == 32);

    const RunConfig gas = preset_for(DatasetKind::GasPipeline);
    CHECK(gas.extractor_widths == std::vector<std::size_t>{100});
    CHECK(gas.grid_size == 5);
    CHECK(gas.spline_order == 1);
    CHECK(gas.pretrain_batch_size == 64);
    CHECK(gas.masking_fraction == 0.2);
    CHECK(gas.finetune_batch_size == 2);

    // Shared across presets.
    for (const RunConfig& c : {unsw, bot, gas}) {
        CHECK(c.temperature == 0.5);
        CHECK(c.pretrain_epochs == 50);
        CHECK(c.finetune_epochs == 100);
        CHECK(c.pretrain_learning_rate == 1e-3);
        CHECK(c.finetune_learning_rate == 1e-3);
    }
}

TEST_CASE("cli: full pipeline on a synthetic fixture") {
    const std::string data = path_of("blobs.csv");
    const std::string cfg = path_of("small.cfg");
    const std::string bundle = path_of("model.bundle");
    const std::string done = path_of("model.finetuned.bundle");
    write_file(cfg,
               "extractor_widths = 8\n"
               "grid_size = 5\n"
               "spline_order = 1\n"
               "pretrain_batch_size = 16\n"
               "pretrain_epochs = 3\n"
               "pretrain_learning_rate = 0.003\n"
               "finetune_batch_size = 16\n"
               "finetune_epochs = 15\n"
               "finetune_learning_rate = 0.005\n");

    CHECK(run({"synth", "--classes", "3", "--dims", "6", "--per-class", "80", "--separation",
               "6", "--seed", "5", "--out", data}) == 0);
    CHECK(fs::exists(data));

    CHECK(run({"pretrain", "--data", data, "--out", bundle, "--config", cfg, "--seed", "11"}) ==
          0);
    CHECK(fs::exists(bundle));
    CHECK(fs::exists(path_of("model.loss.csv")));
    {
        const CsvTable loss = read_csv(path_of("model.loss.csv"));
        CHECK(loss.header == std::vector<std::string>{"epoch", "mean_loss"});
        CHECK(loss.n_rows() == 3);
        const ModelBundle b = load_bundle(bundle);
        CHECK(!b.has_head);
        CHECK(b.extractor.d_in() == 6);
        CHECK(b.extractor.d_out() == 8);
        CHECK(b.pretrain_cfg.epochs == 3);
        CHECK(b.pretrain_cfg.batch_size == 16);
        CHECK(b.pretrain_cfg.seed == 11);
        CHECK(b.ratios.pretrain == 0.80);
        CHECK(b.ratios.finetune == 0.08);
    }

    // Evaluate refuses a head-less bundle.
    CHECK(run({"evaluate", "--bundle", bundle, "--data", data, "--report",
               path_of("early.json")}) == 2);
    CHECK(!fs::exists(path_of("early.json")));

    CHECK(run({"finetune", "--bundle", bundle, "--data", data, "--out", done, "--config", cfg}) ==
          0);
    CHECK(fs::exists(done));
    CHECK(fs::exists(path_of("model.finetuned.history.csv")));
    {
        const CsvTable hist = read_csv(path_of("model.finetuned.history.csv"));
        CHECK(hist.header == std::vector<std::string>{"epoch", "loss", "train_accuracy"});
        CHECK(hist.n_rows() == 15);
        const ModelBundle b = load_bundle(done);
        CHECK(b.has_head);
        CHECK(b.head.d_out() == 3);
        CHECK(b.schema.class_names.size() == 3);
        CHECK(b.finetune_cfg.epochs == 15);
        CHECK_NOTHROW((void)b.to_classifier());
    }

    const std::string report = path_of("report.json");
    CHECK(run({"evaluate", "--bundle", done, "--data", data, "--report", report}) == 0);
    {
        const nlohmann::json j = nlohmann::json::parse(read_file(report));
        CHECK(j.at("averaging") == "macro");
        const double acc = j.at("accuracy").get<double>();
        CHECK(acc >= 0.0);
        CHECK(acc <= 100.0);
        CHECK(j.at("evaluated_rows").get<std::size_t>() == 48); // 240 - floor(240*0.8)
        CHECK(j.at("per_class").size() == 3);
        CHECK(j.at("averages").contains("weighted"));
        CHECK(j.at("averages").contains("micro"));

        const CsvTable emb = read_csv(path_of("report.embeddings.csv"));
        CHECK(emb.n_cols() == 9); // e0..e7 + label
        CHECK(emb.header.front() == "e0");
        CHECK(emb.header.back() == "label");
        CHECK(emb.n_rows() == 48);

        const CsvTable conf = read_csv(path_of("report.confusion.csv"));
        CHECK(conf.n_rows() == 3);
        CHECK(conf.n_cols() == 4); // true_class + 3 predictions
    }

    // Evaluating every row is allowed.
    CHECK(run({"evaluate", "--bundle", done, "--data", data, "--report", path_of("all.json"),
               "--use-split", "all", "--averaging", "weighted"}) == 0);
    {
        const nlohmann::json j = nlohmann::json::parse(read_file(path_of("all.json")));
        CHECK(j.at("averaging") == "weighted");
        CHECK(j.at("evaluated_rows").get<std::size_t>() == 240);
    }

    CHECK(run({"bench", "--bundle", done, "--data", data, "--repeats", "3"}) == 0);

    // Spline export: check phi(0) against the direct formula. [DERIVED]
    const std::string curves = path_of("curves.csv");
    CHECK(run({"export-splines", "--bundle", done, "--out", curves, "--layer", "0", "--edges",
               "0:0,2:1", "--samples", "9"}) == 0);
    {
        const CsvTable t = read_csv(curves);
        CHECK(t.header == std::vector<std::string>{"edge_in", "edge_out", "x", "phi"});
        CHECK(t.n_rows() == 2 * 9);
        const ModelBundle b = load_bundle(done);
        const KanLayer& layer = b.extractor.layer(0);
        // Row 4 of the first edge samples x = 0 where SiLU vanishes.
        CHECK(t.columns[0][4] == "0");
        CHECK(t.columns[1][4] == "0");
        const double x4 = std::stod(t.columns[2][4]);
        const double phi4 = std::stod(t.columns[3][4]);
        CHECK(std::fabs(x4) <= 1e-12);
        double want = 0.0;
        for (int i = 0; i < layer.grid().basis_count(); ++i) {
            want += layer.coeff(0, 0, static_cast<std::size_t>(i)) *
                    oracle::bspline_basis(layer.grid().knots, static_cast<std::size_t>(i),
                                          layer.grid().order, 0.0);
        }
        want *= layer.spline_scaler(0, 0);
        CHECK(std::fabs(phi4 - want) <= 1e-9); // %.12g round-trip
        const CsvTable ctrl = read_csv(path_of("curves.control.csv"));
        CHECK(ctrl.n_rows() == 2 * static_cast<std::size_t>(layer.grid().basis_count()));
    }

    // Same-seed reruns produce byte-identical bundles.
    const std::string again = path_of("model_again.bundle");
    CHECK(run({"pretrain", "--data", data, "--out", again, "--config", cfg, "--seed", "11"}) ==
          0);
    CHECK(read_file(bundle) == read_file(again));

    // Different seed, different bytes.
    const std::string other = path_of("model_other.bundle");
    CHECK(run({"pretrain", "--data", data, "--out", other, "--config", cfg, "--seed", "12"}) ==
          0);
    CHECK(read_file(bundle) != read_file(other));
}

TEST_CASE("cli: failures exit 2 and leave no partial outputs") {
    const std::string ghost = path_of("ghost.bundle");
    CHECK(run({"pretrain", "--data", path_of("no-such.csv"), "--out", ghost}) == 2);
    CHECK(!fs::exists(ghost));
    CHECK(!fs::exists(path_of("ghost.loss.csv")));

    CHECK(run({"export-splines", "--bundle", path_of("roundtrip.bundle"), "--out",
               path_of("bad_curves.csv"), "--layer", "9"}) == 2);
    CHECK(!fs::exists(path_of("bad_curves.csv")));
    CHECK(!fs::exists(path_of("bad_curves.control.csv")));

    CHECK(run({}) == 2);                       // a subcommand is required
    CHECK(run({"pretrain"}) == 2);             // missing required flags
    CHECK(run({"transmogrify"}) == 2);         // unknown subcommand
    CHECK(run({"synth", "--out", path_of("g.csv"), "--classes", "1"}) == 2);
    CHECK(!fs::exists(path_of("g.csv")));

    CHECK(run({"bench", "--bundle", path_of("model.bundle"), "--data",
               path_of("blobs.csv")}) == 2); // pretrain-only bundle has no head

    // --use-split name validation.
    CHECK(run({"evaluate", "--bundle", path_of("model.finetuned.bundle"), "--data",
               path_of("blobs.csv"), "--report", path_of("x.json"), "--use-split",
               "validation"}) == 2);
    CHECK(!fs::exists(path_of("x.json")));
}
