#include "ckan/cli.hpp"

#include "ckan/errors.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace ckan {

using nlohmann::json;

SplitRatios RunConfig::effective_ratios() const {
    SplitRatios r = split_ratios_for(dataset);
    if (pretrain_ratio >= 0.0) r.pretrain = pretrain_ratio;
    if (finetune_ratio >= 0.0) r.finetune = finetune_ratio;
    return r;
}

RunConfig preset_for(DatasetKind kind) {
    RunConfig cfg;
    cfg.dataset = kind;
    switch (kind) {
    case DatasetKind::UnswNb15:
        cfg.extractor_widths = {50};
        cfg.grid_size = 50;
        cfg.spline_order = 1;
        cfg.pretrain_batch_size = 64;
        cfg.masking_fraction = 0.1;
        cfg.finetune_batch_size = 64;
        break;
    case DatasetKind::BotIot:
        cfg.extractor_widths = {100};
        cfg.grid_size = 50;
        cfg.spline_order = 3;
        cfg.pretrain_batch_size = 16;
        cfg.masking_fraction = 0.2;
        cfg.finetune_batch_size = 32;
        break;
    case DatasetKind::GasPipeline:
        cfg.extractor_widths = {100};
        cfg.grid_size = 5;
        cfg.spline_order = 1;
        cfg.pretrain_batch_size = 64;
        cfg.masking_fraction = 0.2;
        cfg.finetune_batch_size = 2;
        break;
    case DatasetKind::GenericCsv:
        break; // desk-scale defaults from the struct
    }
    return cfg;
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
    if (name == "sgd") return OptimizerKind::SGD;
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "adamw") return OptimizerKind::AdamW;
    throw ArgumentError("unknown optimizer '" + name + "' (sgd | adam | adamw)");
}

namespace {

std::string trim_copy(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_double_value(const std::string& key, const std::string& v) {
    const std::string t = trim_copy(v);
    const char* begin = t.c_str();
    char* end = nullptr;
    const double x = std::strtod(begin, &end);
    if (t.empty() || end != begin + t.size()) {
        throw ArgumentError("config key '" + key + "': cannot parse '" + v + "' as a number");
    }
    return x;
}

std::uint64_t parse_u64_value(const std::string& key, const std::string& v) {
    const std::string t = trim_copy(v);
    const char* begin = t.c_str();
    char* end = nullptr;
    const unsigned long long x = std::strtoull(begin, &end, 10);
    if (t.empty() || end != begin + t.size()) {
        throw ArgumentError("config key '" + key + "': cannot parse '" + v +
                            "' as a nonnegative integer");
    }
    return static_cast<std::uint64_t>(x);
}

std::vector<std::size_t> parse_width_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> widths;
    std::string item;
    std::istringstream ss(v);
    while (std::getline(ss, item, ',')) {
        const std::size_t w = static_cast<std::size_t>(parse_u64_value(key, item));
        if (w == 0) throw ArgumentError("config key '" + key + "': zero layer width");
        widths.push_back(w);
    }
    if (widths.empty()) throw ArgumentError("config key '" + key + "': empty width list");
    return widths;
}

} // namespace

std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim_copy(line);
        if (t.empty()) continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ArgumentError("config: " + path + " line " + std::to_string(lineno) +
                                ": expected 'key = value'");
        }
        entries.emplace_back(trim_copy(t.substr(0, eq)), trim_copy(t.substr(eq + 1)));
    }
    return entries;
}

void apply_kv(RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& entries) {
    for (const auto& [key, value] : entries) {
        if (key == "dataset_kind") cfg.dataset = dataset_kind_from_string(value);
        else if (key == "label_column") cfg.label_column = value;
        else if (key == "extractor_widths") cfg.extractor_widths = parse_width_list(key, value);
        else if (key == "grid_size") cfg.grid_size = static_cast<int>(parse_u64_value(key, value));
        else if (key == "spline_order") cfg.spline_order = static_cast<int>(parse_u64_value(key, value));
        else if (key == "range_min") cfg.range_min = parse_double_value(key, value);
        else if (key == "range_max") cfg.range_max = parse_double_value(key, value);
        else if (key == "pretrain_ratio") cfg.pretrain_ratio = parse_double_value(key, value);
        else if (key == "finetune_ratio") cfg.finetune_ratio = parse_double_value(key, value);
        else if (key == "scaling") {
            if (value != "standard" && value != "minmax") {
                throw ArgumentError("config key 'scaling': expected standard | minmax");
            }
            cfg.scaling = value;
        } else if (key == "pretrain_batch_size") {
            cfg.pretrain_batch_size = static_cast<std::size_t>(parse_u64_value(key, value));
        } else if (key == "masking_fraction") cfg.masking_fraction = parse_double_value(key, value);
        else if (key == "temperature") cfg.temperature = parse_double_value(key, value);
        else if (key == "pretrain_epochs") {
            cfg.pretrain_epochs = static_cast<std::size_t>(parse_u64_value(key, value));
        } else if (key == "pretrain_learning_rate") {
            cfg.pretrain_learning_rate = parse_double_value(key, value);
        } else if (key == "pretrain_optimizer") {
            cfg.pretrain_optimizer = optimizer_kind_from_string(value);
        } else if (key == "finetune_batch_size") {
            cfg.finetune_batch_size = static_cast<std::size_t>(parse_u64_value(key, value));
        } else if (key == "finetune_epochs") {
            cfg.finetune_epochs = static_cast<std::size_t>(parse_u64_value(key, value));
        } else if (key == "finetune_learning_rate") {
            cfg.finetune_learning_rate = parse_double_value(key, value);
        } else if (key == "finetune_optimizer") {
            cfg.finetune_optimizer = optimizer_kind_from_string(value);
        } else if (key == "weight_decay") cfg.weight_decay = parse_double_value(key, value);
        else if (key == "averaging") cfg.averaging = averaging_from_string(value);
        else if (key == "seed") cfg.seed = parse_u64_value(key, value);
        else throw ArgumentError("config: unknown key '" + key + "'");
    }
}

namespace {

// Seed-stream derivation from the master seed.
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kExtractorInitStream = 2;
constexpr std::uint64_t kPretrainLoopStream = 3;
constexpr std::uint64_t kHeadInitStream = 4;
constexpr std::uint64_t kFinetuneLoopStream = 5;

// Removes declared output files on scope exit unless disarmed, so failed
// commands never leave partial artifacts behind.
class OutputGuard {
public:
    ~OutputGuard() {
        if (disarmed_) return;
        for (const auto& p : paths_) std::remove(p.c_str());
    }
    void track(const std::string& path) { paths_.push_back(path); }
    void disarm() { disarmed_ = true; }

private:
    std::vector<std::string> paths_;
    bool disarmed_ = false;
};

std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& overrides) {
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& o : overrides) {
        const std::size_t eq = o.find('=');
        if (eq == std::string::npos) {
            throw ArgumentError("--set expects key=value, got '" + o + "'");
        }
        entries.emplace_back(trim_copy(o.substr(0, eq)), trim_copy(o.substr(eq + 1)));
    }
    return entries;
}

RunConfig resolve_config(const std::string& config_path, const std::string& dataset_flag,
                         const std::string& label_flag, const std::vector<std::string>& overrides,
                         long long seed_flag, DatasetKind base_kind, bool kind_fixed) {
    std::vector<std::pair<std::string, std::string>> entries;
    if (!config_path.empty()) entries = parse_kv_file(config_path);

    DatasetKind kind = base_kind;
    if (!kind_fixed) {
        if (!dataset_flag.empty()) {
            kind = dataset_kind_from_string(dataset_flag);
        } else {
            for (const auto& [k, v] : entries) {
                if (k == "dataset_kind") kind = dataset_kind_from_string(v);
            }
        }
    }
    RunConfig cfg = preset_for(kind);
    apply_kv(cfg, entries);
    cfg.dataset = kind; // flags outrank a dataset_kind key in the file
    apply_kv(cfg, parse_overrides(overrides));
    if (kind_fixed) cfg.dataset = kind; // bundles pin the dataset
    if (!label_flag.empty()) cfg.label_column = label_flag;
    if (seed_flag >= 0) cfg.seed = static_cast<std::uint64_t>(seed_flag);
    return cfg;
}

struct PreparedData {
    ColumnSchema schema;
    EncodedData encoded;
    DatasetSplits splits;
    std::size_t dropped_rows = 0;
};

PreparedData prepare_data(const std::string& path, DatasetKind kind, const std::string& label,
                          const ColumnSchema* fixed_schema, const SplitRatios& ratios,
                          std::uint64_t split_seed) {
    PreparedData prep;
    RawTable table = load_dataset(path, kind, label);
    prep.dropped_rows = handle_missing(table);
    if (table.n_rows() == 0) throw ArgumentError("data: no usable rows in " + path);
    prep.schema = fixed_schema ? *fixed_schema : fit_schema(table);
    prep.encoded = encode(table, prep.schema);
    if (prep.encoded.labels.empty()) {
        throw ArgumentError("data: no rows with known labels in " + path);
    }
    prep.splits = make_splits(prep.encoded.labels, prep.schema.n_classes(), ratios, split_seed);
    return prep;
}

const std::vector<std::size_t>& select_rows(const std::string& use_split,
                                            const DatasetSplits& splits,
                                            std::vector<std::size_t>& all_storage,
                                            std::size_t n_rows) {
    if (use_split == "pretrain") return splits.pretrain_idx;
    if (use_split == "finetune") return splits.finetune_idx;
    if (use_split == "test") return splits.test_idx;
    if (use_split == "all") {
        all_storage.resize(n_rows);
        for (std::size_t i = 0; i < n_rows; ++i) all_storage[i] = i;
        return all_storage;
    }
    throw ArgumentError("--use-split: expected pretrain | finetune | test | all, got '" +
                        use_split + "'");
}

std::vector<int> take_labels(const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t r : idx) out.push_back(labels[r]);
    return out;
}

KanNetwork build_extractor(std::size_t input_width, const RunConfig& cfg,
                           std::uint64_t init_seed) {
    SplineGrid grid(cfg.spline_order, cfg.grid_size, cfg.range_min, cfg.range_max);
    std::vector<KanLayer> layers;
    std::size_t prev = input_width;
    for (std::size_t w : cfg.extractor_widths) {
        layers.emplace_back(prev, w, grid);
        prev = w;
    }
    KanNetwork net(std::move(layers));
    RngStream rng(init_seed);
    for (auto& layer : net.layers()) layer.init_parameters(rng);
    return net;
}

void write_loss_csv(const std::string& path, const std::vector<double>& losses) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "epoch,mean_loss\n";
    char buf[40];
    for (std::size_t e = 0; e < losses.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%.12g", losses[e]);
        out << (e + 1) << "," << buf << "\n";
    }
    if (!out) throw IoError("write failure on " + path);
}

void write_history_csv(const std::string& path, const FinetuneHistory& hist) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "epoch,loss,train_accuracy\n";
    char buf[80];
    for (std::size_t e = 0; e < hist.epoch_loss.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%.12g,%.12g", hist.epoch_loss[e],
                      hist.epoch_accuracy[e]);
        out << (e + 1) << "," << buf << "\n";
    }
    if (!out) throw IoError("write failure on " + path);
}

std::string strip_suffix(const std::string& path, const std::string& suffix) {
    if (path.size() > suffix.size() &&
        path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0) {
        return path.substr(0, path.size() - suffix.size());
    }
    return path;
}

Matrix standardized_rows(const EncodedData& encoded, const std::vector<std::size_t>& idx,
                         const Scaler& scaler) {
    return transform(scaler, take_rows(encoded.features, idx));
}

// Keeps peak memory bounded on large evaluation sets.
constexpr std::size_t kEvalChunk = 1024;

} // namespace

int cmd_pretrain(const PretrainArgs& args) {
    RunConfig cfg = resolve_config(args.config_path, args.dataset, args.label, args.overrides,
                                   args.seed, DatasetKind::GenericCsv, false);
    PreparedData prep = prepare_data(args.data_path, cfg.dataset, cfg.label_column, nullptr,
                                     cfg.effective_ratios(), cfg.seed + kSplitStream);
    if (prep.dropped_rows > 0) {
        std::cout << "dropped " << prep.dropped_rows << " rows with missing values\n";
    }

    std::vector<std::size_t> all_storage;
    const auto& rows = select_rows(args.use_split, prep.splits, all_storage,
                                   prep.encoded.labels.size());
    if (rows.empty()) throw ArgumentError("pretrain: selected split is empty");
    Matrix features = take_rows(prep.encoded.features, rows);
    const Scaler scaler = cfg.scaling == "minmax" ? fit_min_max(features) : fit_scaler(features);
    features = transform(scaler, features);

    KanNetwork extractor =
        build_extractor(features.cols, cfg, cfg.seed + kExtractorInitStream);

    ContrastiveConfig pc;
    pc.batch_size = cfg.pretrain_batch_size;
    pc.masking_fraction = cfg.masking_fraction;
    pc.temperature = cfg.temperature;
    pc.epochs = cfg.pretrain_epochs;
    pc.learning_rate = cfg.pretrain_learning_rate;
    pc.seed = cfg.seed + kPretrainLoopStream;

    Optimizer opt(cfg.pretrain_optimizer, cfg.pretrain_learning_rate);
    opt.weight_decay = cfg.weight_decay;
    PretrainResult result = pretrain(extractor, features, pc, opt);

    ModelBundle bundle;
    bundle.kind = cfg.dataset;
    bundle.label_override = cfg.label_column;
    bundle.schema = prep.schema;
    bundle.scaler = scaler;
    bundle.ratios = cfg.effective_ratios();
    bundle.extractor = std::move(extractor);
    bundle.pretrain_cfg = pc;
    bundle.pretrain_cfg.seed = cfg.seed; // echo the master seed
    bundle.finetune_cfg.batch_size = cfg.finetune_batch_size;
    bundle.finetune_cfg.epochs = cfg.finetune_epochs;
    bundle.finetune_cfg.learning_rate = cfg.finetune_learning_rate;
    bundle.finetune_cfg.seed = cfg.seed;

    OutputGuard guard;
    guard.track(args.out_path);
    save_bundle(args.out_path, bundle);
    const std::string loss_path = strip_suffix(args.out_path, ".bundle") + ".loss.csv";
    guard.track(loss_path);
    write_loss_csv(loss_path, result.epoch_loss);
    guard.disarm();

    if (result.epoch_loss.empty()) {
        std::cout << "pretrained 0 epochs (initialization-only bundle)\n";
    } else {
        std::cout << "final epoch mean contrastive loss: " << result.epoch_loss.back() << "\n";
    }
    std::cout << "wrote " << args.out_path << "\n";
    return 0;
}

int cmd_finetune(const FinetuneArgs& args) {
    ModelBundle bundle = load_bundle(args.bundle_path);
    if (bundle.extractor.depth() == 0) {
        throw ArgumentError("finetune: incomplete bundle (no extractor) in " + args.bundle_path);
    }
    RunConfig cfg = resolve_config(args.config_path, "", "", args.overrides, args.seed,
                                   bundle.kind, true);
    const std::uint64_t master = bundle.pretrain_cfg.seed;
    const std::uint64_t ft_seed = args.seed >= 0 ? static_cast<std::uint64_t>(args.seed) : master;

    PreparedData prep = prepare_data(args.data_path, bundle.kind, bundle.label_override,
                                     &bundle.schema, bundle.ratios, master + kSplitStream);
    if (prep.encoded.unknown_label_rows > 0) {
        std::cout << "warning: " << prep.encoded.unknown_label_rows
                  << " rows with labels outside the model's class list were excluded\n";
    }

    std::vector<std::size_t> all_storage;
    const auto& rows = select_rows(args.use_split, prep.splits, all_storage,
                                   prep.encoded.labels.size());
    if (rows.empty()) throw ArgumentError("finetune: selected split is empty");
    LabeledData labeled;
    labeled.features = standardized_rows(prep.encoded, rows, bundle.scaler);
    labeled.labels = take_labels(prep.encoded.labels, rows);

    ClassifierModel model;
    model.extractor = std::move(bundle.extractor);
    model.class_names = bundle.schema.class_names;
    SplineGrid head_grid(cfg.spline_order, cfg.grid_size, cfg.range_min, cfg.range_max);
    model.head = KanLayer(model.extractor.d_out(), model.n_classes(), head_grid);
    RngStream head_rng(ft_seed + kHeadInitStream);
    model.head.init_parameters(head_rng);

    FinetuneConfig fc;
    fc.batch_size = cfg.finetune_batch_size;
    fc.epochs = cfg.finetune_epochs;
    fc.learning_rate = cfg.finetune_learning_rate;
    fc.seed = ft_seed + kFinetuneLoopStream;

    Optimizer opt(cfg.finetune_optimizer, cfg.finetune_learning_rate);
    opt.weight_decay = cfg.weight_decay;
    FinetuneHistory hist = args.end_to_end ? train_supervised(model, labeled, fc, opt)
                                           : finetune(model, labeled, fc, opt);

    bundle.extractor = std::move(model.extractor);
    bundle.head = std::move(model.head);
    bundle.has_head = true;
    bundle.finetune_cfg = fc;
    bundle.finetune_cfg.seed = ft_seed; // echo the master seed

    OutputGuard guard;
    guard.track(args.out_path);
    save_bundle(args.out_path, bundle);
    const std::string hist_path = strip_suffix(args.out_path, ".bundle") + ".history.csv";
    guard.track(hist_path);
    write_history_csv(hist_path, hist);
    guard.disarm();

    if (!hist.epoch_loss.empty()) {
        std::cout << "final epoch loss " << hist.epoch_loss.back() << ", training accuracy "
                  << hist.epoch_accuracy.back() << "\n";
    }
    std::cout << "wrote " << args.out_path << "\n";
    return 0;
}

namespace {

json metrics_to_json(const MetricsReport& rep) {
    return json{{"accuracy", rep.accuracy},
                {"precision", rep.precision},
                {"recall", rep.recall},
                {"f1", rep.f1},
                {"zero_division_events", rep.zero_division_events}};
}

void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm,
                         const std::vector<std::string>& class_names) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "true_class";
    for (const auto& name : class_names) out << ",pred_" << name;
    out << "\n";
    for (std::size_t t = 0; t < cm.n_classes(); ++t) {
        out << class_names[t];
        for (std::size_t p = 0; p < cm.n_classes(); ++p) out << "," << cm.counts[t][p];
        out << "\n";
    }
    if (!out) throw IoError("write failure on " + path);
}

} // namespace

int cmd_evaluate(const EvaluateArgs& args) {
    ModelBundle bundle = load_bundle(args.bundle_path);
    if (!bundle.has_head) {
        throw ArgumentError("evaluate: incomplete bundle (no classification head) in " +
                            args.bundle_path);
    }
    const Averaging averaging = averaging_from_string(args.averaging);
    PreparedData prep =
        prepare_data(args.data_path, bundle.kind, bundle.label_override, &bundle.schema,
                     bundle.ratios, bundle.pretrain_cfg.seed + kSplitStream);
    if (prep.encoded.unknown_label_rows > 0) {
        std::cout << "warning: " << prep.encoded.unknown_label_rows
                  << " rows with labels outside the model's class list were excluded\n";
    }

    std::vector<std::size_t> all_storage;
    const auto& rows = select_rows(args.use_split, prep.splits, all_storage,
                                   prep.encoded.labels.size());
    if (rows.empty()) throw ArgumentError("evaluate: selected split is empty");

    ClassifierModel model = bundle.to_classifier();
    const std::string base = strip_suffix(args.report_path, ".json");
    const std::string confusion_path = base + ".confusion.csv";
    const std::string embeddings_path = base + ".embeddings.csv";

    OutputGuard guard;
    guard.track(args.report_path);
    guard.track(confusion_path);
    guard.track(embeddings_path);

    std::ofstream emb(embeddings_path, std::ios::binary);
    if (!emb) throw IoError("cannot open " + embeddings_path + " for writing");
    for (std::size_t d = 0; d < model.extractor.d_out(); ++d) emb << "e" << d << ",";
    emb << "label\n";

    ConfusionMatrix cm(model.n_classes());
    char buf[40];
    for (std::size_t start = 0; start < rows.size(); start += kEvalChunk) {
        const std::size_t b = std::min(kEvalChunk, rows.size() - start);
        std::vector<std::size_t> chunk(rows.begin() + static_cast<std::ptrdiff_t>(start),
                                       rows.begin() + static_cast<std::ptrdiff_t>(start + b));
        Matrix x = standardized_rows(prep.encoded, chunk, bundle.scaler);
        const std::vector<int> y = take_labels(prep.encoded.labels, chunk);

        Matrix z = model.extractor.forward(x);
        Matrix logits = model.head.forward(z);
        for (std::size_t r = 0; r < b; ++r) {
            const double* row = logits.row_ptr(r);
            const int pred = static_cast<int>(
                std::max_element(row, row + logits.cols) - row);
            cm.add(y[r], pred);
            const double* zr = z.row_ptr(r);
            for (std::size_t d = 0; d < z.cols; ++d) {
                std::snprintf(buf, sizeof(buf), "%.12g", zr[d]);
                emb << buf << ",";
            }
            emb << model.class_names[static_cast<std::size_t>(y[r])] << "\n";
        }
    }
    if (!emb) throw IoError("write failure on " + embeddings_path);
    emb.close();

    const MetricsReport chosen = compute_metrics(cm, averaging);
    json report;
    report["averaging"] = averaging_to_string(averaging);
    report["accuracy"] = chosen.accuracy;
    report["precision"] = chosen.precision;
    report["recall"] = chosen.recall;
    report["f1"] = chosen.f1;
    report["averages"] = json{{"macro", metrics_to_json(compute_metrics(cm, Averaging::Macro))},
                              {"weighted", metrics_to_json(compute_metrics(cm, Averaging::Weighted))},
                              {"micro", metrics_to_json(compute_metrics(cm, Averaging::Micro))}};
    report["per_class"] = json::array();
    for (std::size_t k = 0; k < chosen.per_class.size(); ++k) {
        const ClassMetrics& m = chosen.per_class[k];
        report["per_class"].push_back(json{{"class", model.class_names[k]},
                                           {"precision", m.precision},
                                           {"recall", m.recall},
                                           {"f1", m.f1},
                                           {"support", m.support}});
    }
    report["evaluated_rows"] = rows.size();
    report["excluded_unknown_label_rows"] = prep.encoded.unknown_label_rows;

    std::ofstream rep_out(args.report_path, std::ios::binary);
    if (!rep_out) throw IoError("cannot open " + args.report_path + " for writing");
    rep_out << report.dump(2) << "\n";
    if (!rep_out) throw IoError("write failure on " + args.report_path);
    rep_out.close();

    write_confusion_csv(confusion_path, cm, model.class_names);
    guard.disarm();

    std::cout << "accuracy " << chosen.accuracy << "%, " << averaging_to_string(averaging)
              << " precision " << chosen.precision << "%, recall " << chosen.recall << "%, f1 "
              << chosen.f1 << "%\n";
    std::cout << "wrote " << args.report_path << "\n";
    return 0;
}

int cmd_bench(const BenchArgs& args) {
    ModelBundle bundle = load_bundle(args.bundle_path);
    if (!bundle.has_head) {
        throw ArgumentError("bench: incomplete bundle (no classification head) in " +
                            args.bundle_path);
    }
    PreparedData prep =
        prepare_data(args.data_path, bundle.kind, bundle.label_override, &bundle.schema,
                     bundle.ratios, bundle.pretrain_cfg.seed + kSplitStream);
    std::vector<std::size_t> all_storage;
    const auto& rows = select_rows(args.use_split, prep.splits, all_storage,
                                   prep.encoded.labels.size());
    if (rows.empty()) throw ArgumentError("bench: selected split is empty");

    Matrix features = standardized_rows(prep.encoded, rows, bundle.scaler);
    ClassifierModel model = bundle.to_classifier();
    const std::size_t batch =
        args.batch_size > 0 ? args.batch_size : bundle.finetune_cfg.batch_size;
    LatencyReport rep = latency_benchmark(model, features, batch, args.repeats);
    std::cout << "batch size " << rep.batch_size << ", " << rep.samples << " samples, "
              << rep.repeats << " repeats\n";
    std::cout << "mean " << rep.mean_ms_per_sample << " ms/sample, p50 " << rep.p50_ms_per_sample
              << ", p95 " << rep.p95_ms_per_sample << "\n";
    return 0;
}

int cmd_export_splines(const ExportSplinesArgs& args) {
    ModelBundle bundle = load_bundle(args.bundle_path);
    const KanLayer* layer = nullptr;
    if (args.layer == "head") {
        if (!bundle.has_head) {
            throw ArgumentError("export-splines: bundle has no classification head");
        }
        layer = &bundle.head;
    } else {
        const std::uint64_t idx = parse_u64_value("--layer", args.layer);
        if (idx >= bundle.extractor.depth()) {
            throw IndexError("export-splines: layer " + std::to_string(idx) +
                             " outside [0, " + std::to_string(bundle.extractor.depth()) + ")");
        }
        layer = &bundle.extractor.layer(static_cast<std::size_t>(idx));
    }

    std::vector<std::pair<std::size_t, std::size_t>> edges;
    if (args.edges.empty()) {
        // Default: the first 12 edges, cycling input features first.
        const std::size_t total = layer->d_in() * layer->d_out();
        for (std::size_t e = 0; e < std::min<std::size_t>(12, total); ++e) {
            edges.emplace_back(e % layer->d_in(), e / layer->d_in());
        }
    } else {
        std::istringstream ss(args.edges);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::size_t colon = item.find(':');
            if (colon == std::string::npos) {
                throw ArgumentError("--edges expects in:out pairs, got '" + item + "'");
            }
            edges.emplace_back(parse_u64_value("--edges", item.substr(0, colon)),
                               parse_u64_value("--edges", item.substr(colon + 1)));
        }
        if (edges.empty()) throw ArgumentError("--edges: empty edge list");
    }

    CurveTable curves = export_activation_curves(*layer, edges, args.samples);

    const std::string base = strip_suffix(args.out_path, ".csv");
    const std::string control_path = base + ".control.csv";
    OutputGuard guard;
    guard.track(args.out_path);
    guard.track(control_path);

    std::ofstream out(args.out_path, std::ios::binary);
    if (!out) throw IoError("cannot open " + args.out_path + " for writing");
    out << "edge_in,edge_out,x,phi\n";
    char buf[80];
    for (const auto& p : curves.points) {
        std::snprintf(buf, sizeof(buf), "%.12g,%.12g", p.x, p.phi);
        out << p.edge_in << "," << p.edge_out << "," << buf << "\n";
    }
    if (!out) throw IoError("write failure on " + args.out_path);
    out.close();

    std::ofstream ctrl(control_path, std::ios::binary);
    if (!ctrl) throw IoError("cannot open " + control_path + " for writing");
    ctrl << "edge_in,edge_out,knot_x,coeff\n";
    for (const auto& p : curves.control_points) {
        std::snprintf(buf, sizeof(buf), "%.12g,%.12g", p.knot_x, p.coeff);
        ctrl << p.edge_in << "," << p.edge_out << "," << buf << "\n";
    }
    if (!ctrl) throw IoError("write failure on " + control_path);
    ctrl.close();
    guard.disarm();

    std::cout << "exported " << edges.size() << " edge curves to " << args.out_path << "\n";
    return 0;
}

int cmd_synth(const SynthArgs& args) {
    LabeledData data =
        synth_generate(args.classes, args.dims, args.per_class, args.separation, args.seed);
    OutputGuard guard;
    guard.track(args.out_path);
    write_labeled_csv(args.out_path, data);
    guard.disarm();
    std::cout << "wrote " << data.features.rows << " rows (" << args.classes << " classes, "
              << args.dims << " dims) to " << args.out_path << "\n";
    return 0;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Semi-supervised contrastive KAN intrusion-detection pipeline"};
    app.require_subcommand(1);

    PretrainArgs pre;
    auto* sub_pre = app.add_subcommand("pretrain", "Contrastive pretraining of the extractor");
    sub_pre->add_option("--data", pre.data_path, "Input CSV")->required();
    sub_pre->add_option("--out", pre.out_path, "Output bundle path")->required();
    sub_pre->add_option("--config", pre.config_path, "Key=value config file");
    sub_pre->add_option("--dataset", pre.dataset, "unsw_nb15 | bot_iot | gas_pipeline | generic_csv");
    sub_pre->add_option("--label", pre.label, "Label column (generic_csv)");
    sub_pre->add_option("--set", pre.overrides, "Config override key=value (repeatable)");
    sub_pre->add_option("--use-split", pre.use_split, "pretrain | all (default pretrain)");
    sub_pre->add_option("--seed", pre.seed, "Master seed");

    FinetuneArgs fin;
    auto* sub_fin = app.add_subcommand("finetune", "Supervised fine-tuning of the head");
    sub_fin->add_option("--bundle", fin.bundle_path, "Pretrained bundle")->required();
    sub_fin->add_option("--data", fin.data_path, "Input CSV")->required();
    sub_fin->add_option("--out", fin.out_path, "Output bundle path")->required();
    sub_fin->add_option("--config", fin.config_path, "Key=value config file");
    sub_fin->add_option("--set", fin.overrides, "Config override key=value (repeatable)");
    sub_fin->add_option("--use-split", fin.use_split, "finetune | pretrain | test | all");
    sub_fin->add_option("--seed", fin.seed, "Fine-tuning seed (default: bundle's)");
    sub_fin->add_flag("--end-to-end", fin.end_to_end,
                      "Ablation: train extractor and head jointly on the labeled split");

    EvaluateArgs ev;
    auto* sub_ev = app.add_subcommand("evaluate", "Metrics report on a split");
    sub_ev->add_option("--bundle", ev.bundle_path, "Completed bundle")->required();
    sub_ev->add_option("--data", ev.data_path, "Input CSV")->required();
    sub_ev->add_option("--report", ev.report_path, "Output JSON report")->required();
    sub_ev->add_option("--use-split", ev.use_split, "pretrain | finetune | test | all");
    sub_ev->add_option("--averaging", ev.averaging, "macro | weighted | micro");

    BenchArgs bench;
    auto* sub_bench = app.add_subcommand("bench", "Per-sample inference latency");
    sub_bench->add_option("--bundle", bench.bundle_path, "Completed bundle")->required();
    sub_bench->add_option("--data", bench.data_path, "Input CSV")->required();
    sub_bench->add_option("--use-split", bench.use_split, "pretrain | finetune | test | all");
    sub_bench->add_option("--repeats", bench.repeats, "Timed repeats (>= 3)");
    sub_bench->add_option("--batch", bench.batch_size, "Batch size (default: bundle's)");

    ExportSplinesArgs ex;
    auto* sub_ex = app.add_subcommand("export-splines", "Learned activation curves as CSV");
    sub_ex->add_option("--bundle", ex.bundle_path, "Bundle (partial is fine)")->required();
    sub_ex->add_option("--out", ex.out_path, "Output curves CSV")->required();
    sub_ex->add_option("--layer", ex.layer, "Extractor layer index or 'head'");
    sub_ex->add_option("--edges", ex.edges, "in:out,in:out,... (default: first 12)");
    sub_ex->add_option("--samples", ex.samples, "Samples per curve (>= 2)");

    SynthArgs sy;
    auto* sub_sy = app.add_subcommand("synth", "Generate Gaussian-blob CSV fixtures");
    sub_sy->add_option("--classes", sy.classes, "Class count (>= 2)");
    sub_sy->add_option("--dims", sy.dims, "Feature count (>= 2)");
    sub_sy->add_option("--per-class", sy.per_class, "Rows per class");
    sub_sy->add_option("--separation", sy.separation, "Center distance from the origin");
    sub_sy->add_option("--seed", sy.seed, "Seed");
    sub_sy->add_option("--out", sy.out_path, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sub_pre->parsed()) return cmd_pretrain(pre);
        if (sub_fin->parsed()) return cmd_finetune(fin);
        if (sub_ev->parsed()) return cmd_evaluate(ev);
        if (sub_bench->parsed()) return cmd_bench(bench);
        if (sub_ex->parsed()) return cmd_export_splines(ex);
        if (sub_sy->parsed()) return cmd_synth(sy);
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IndexError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace ckan
