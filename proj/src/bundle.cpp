#include "ckan/bundle.hpp"

#include "ckan/errors.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace ckan {

using nlohmann::json;

std::uint64_t fnv1a(const unsigned char* data, std::size_t n) {
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

void append_f64_le(std::string& blob, const double* values, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(values[i]);
        for (int b = 0; b < 8; ++b) {
            blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
        }
    }
}

class BlobReader {
public:
    BlobReader(const std::string& blob) : blob_(blob) {}

    void read_f64(double* out, std::size_t n) {
        if (pos_ + 8 * n > blob_.size()) {
            throw IoError("bundle: numeric block shorter than the header declares");
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b) {
                bits |= static_cast<std::uint64_t>(
                            static_cast<unsigned char>(blob_[pos_ + 8 * static_cast<std::size_t>(i) + b]))
                        << (8 * b);
            }
            out[i] = std::bit_cast<double>(bits);
        }
        pos_ += 8 * n;
    }

    bool exhausted() const { return pos_ == blob_.size(); }

private:
    const std::string& blob_;
    std::size_t pos_ = 0;
};

const char* column_kind_name(ColumnKind k) {
    switch (k) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Drop: return "drop";
    case ColumnKind::Label: return "label";
    }
    return "numeric";
}

ColumnKind column_kind_from_name(const std::string& s) {
    if (s == "numeric") return ColumnKind::Numeric;
    if (s == "categorical") return ColumnKind::Categorical;
    if (s == "drop") return ColumnKind::Drop;
    if (s == "label") return ColumnKind::Label;
    throw IoError("bundle: unknown column kind '" + s + "'");
}

json layer_to_json(const KanLayer& layer) {
    return json{{"d_in", layer.d_in()},
                {"d_out", layer.d_out()},
                {"grid_size", layer.grid().grid_size},
                {"order", layer.grid().order},
                {"range_min", layer.grid().range_min},
                {"range_max", layer.grid().range_max}};
}

KanLayer layer_from_json(const json& j) {
    SplineGrid grid(j.at("order").get<int>(), j.at("grid_size").get<int>(),
                    j.at("range_min").get<double>(), j.at("range_max").get<double>());
    return KanLayer(j.at("d_in").get<std::size_t>(), j.at("d_out").get<std::size_t>(), grid);
}

void append_layer_params(std::string& blob, const KanLayer& layer) {
    append_f64_le(blob, layer.base_weight.data.data(), layer.base_weight.size());
    append_f64_le(blob, layer.spline_scaler.data.data(), layer.spline_scaler.size());
    append_f64_le(blob, layer.spline_coeffs.data(), layer.spline_coeffs.size());
}

void read_layer_params(BlobReader& reader, KanLayer& layer) {
    reader.read_f64(layer.base_weight.data.data(), layer.base_weight.size());
    reader.read_f64(layer.spline_scaler.data.data(), layer.spline_scaler.size());
    reader.read_f64(layer.spline_coeffs.data(), layer.spline_coeffs.size());
}

} // namespace

ClassifierModel ModelBundle::to_classifier() const {
    if (!has_head) throw StateError("bundle: incomplete bundle (no classification head)");
    ClassifierModel model;
    model.extractor = extractor;
    model.extractor.set_frozen(true);
    model.head = head;
    model.class_names = schema.class_names;
    return model;
}

void save_bundle(const std::string& path, const ModelBundle& bundle) {
    std::string blob;
    append_f64_le(blob, bundle.scaler.mu.data(), bundle.scaler.mu.size());
    append_f64_le(blob, bundle.scaler.sigma.data(), bundle.scaler.sigma.size());
    for (const auto& layer : bundle.extractor.layers()) append_layer_params(blob, layer);
    if (bundle.has_head) append_layer_params(blob, bundle.head);

    json schema_json;
    schema_json["class_names"] = bundle.schema.class_names;
    schema_json["columns"] = json::array();
    for (const auto& col : bundle.schema.columns) {
        json c{{"name", col.name}, {"kind", column_kind_name(col.kind)}};
        if (col.kind == ColumnKind::Categorical) c["vocabulary"] = col.vocabulary;
        schema_json["columns"].push_back(std::move(c));
    }

    json header;
    header["format_version"] = bundle.format_version;
    header["dataset_kind"] = dataset_kind_to_string(bundle.kind);
    header["label_override"] = bundle.label_override;
    header["schema"] = std::move(schema_json);
    header["scaler_width"] = bundle.scaler.mu.size();
    header["split_ratios"] = json{{"pretrain", bundle.ratios.pretrain},
                                  {"finetune", bundle.ratios.finetune}};
    header["extractor_layers"] = json::array();
    for (const auto& layer : bundle.extractor.layers()) {
        header["extractor_layers"].push_back(layer_to_json(layer));
    }
    header["has_head"] = bundle.has_head;
    if (bundle.has_head) header["head_layer"] = layer_to_json(bundle.head);
    header["pretrain_config"] = json{{"batch_size", bundle.pretrain_cfg.batch_size},
                                     {"masking_fraction", bundle.pretrain_cfg.masking_fraction},
                                     {"temperature", bundle.pretrain_cfg.temperature},
                                     {"epochs", bundle.pretrain_cfg.epochs},
                                     {"learning_rate", bundle.pretrain_cfg.learning_rate},
                                     {"seed", bundle.pretrain_cfg.seed}};
    header["finetune_config"] = json{{"batch_size", bundle.finetune_cfg.batch_size},
                                     {"epochs", bundle.finetune_cfg.epochs},
                                     {"learning_rate", bundle.finetune_cfg.learning_rate},
                                     {"seed", bundle.finetune_cfg.seed}};
    header["blob_checksum_fnv1a"] =
        fnv1a(reinterpret_cast<const unsigned char*>(blob.data()), blob.size());

    const std::string header_text = header.dump(); // sorted keys, deterministic
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("bundle: cannot open " + path + " for writing");
    out << "CKANBUNDLE " << bundle.format_version << " " << header_text.size() << " "
        << blob.size() << "\n";
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("bundle: write failure on " + path);
}

ModelBundle load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("bundle: cannot open " + path);

    std::string magic;
    int version = 0;
    std::size_t header_len = 0, blob_len = 0;
    in >> magic >> version >> header_len >> blob_len;
    if (!in || magic != "CKANBUNDLE") throw IoError("bundle: " + path + " is not a model bundle");
    if (version != kBundleFormatVersion) {
        throw IoError("bundle: unsupported format version " + std::to_string(version) +
                      " (this build reads version " + std::to_string(kBundleFormatVersion) + ")");
    }
    in.get(); // the newline after the length fields

    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    std::string blob(blob_len, '\0');
    in.read(blob.data(), static_cast<std::streamsize>(blob_len));
    if (!in || in.gcount() != static_cast<std::streamsize>(blob_len)) {
        throw IoError("bundle: " + path + " is truncated");
    }

    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::exception& e) {
        throw IoError("bundle: bad header in " + path + ": " + e.what());
    }

    ModelBundle bundle;
    try {
        bundle.format_version = header.at("format_version").get<int>();
        bundle.kind = dataset_kind_from_string(header.at("dataset_kind").get<std::string>());
        bundle.label_override = header.at("label_override").get<std::string>();

        const json& schema_json = header.at("schema");
        bundle.schema.class_names = schema_json.at("class_names").get<std::vector<std::string>>();
        for (const auto& c : schema_json.at("columns")) {
            ColumnSpec spec;
            spec.name = c.at("name").get<std::string>();
            spec.kind = column_kind_from_name(c.at("kind").get<std::string>());
            if (spec.kind == ColumnKind::Categorical) {
                spec.vocabulary = c.at("vocabulary").get<std::vector<std::string>>();
            }
            bundle.schema.columns.push_back(std::move(spec));
        }

        const std::size_t width = header.at("scaler_width").get<std::size_t>();
        bundle.scaler.mu.resize(width);
        bundle.scaler.sigma.resize(width);
        bundle.ratios.pretrain = header.at("split_ratios").at("pretrain").get<double>();
        bundle.ratios.finetune = header.at("split_ratios").at("finetune").get<double>();

        std::vector<KanLayer> layers;
        for (const auto& lj : header.at("extractor_layers")) layers.push_back(layer_from_json(lj));
        bundle.extractor = KanNetwork(std::move(layers));
        bundle.has_head = header.at("has_head").get<bool>();
        if (bundle.has_head) bundle.head = layer_from_json(header.at("head_layer"));

        const json& pc = header.at("pretrain_config");
        bundle.pretrain_cfg.batch_size = pc.at("batch_size").get<std::size_t>();
        bundle.pretrain_cfg.masking_fraction = pc.at("masking_fraction").get<double>();
        bundle.pretrain_cfg.temperature = pc.at("temperature").get<double>();
        bundle.pretrain_cfg.epochs = pc.at("epochs").get<std::size_t>();
        bundle.pretrain_cfg.learning_rate = pc.at("learning_rate").get<double>();
        bundle.pretrain_cfg.seed = pc.at("seed").get<std::uint64_t>();

        const json& fc = header.at("finetune_config");
        bundle.finetune_cfg.batch_size = fc.at("batch_size").get<std::size_t>();
        bundle.finetune_cfg.epochs = fc.at("epochs").get<std::size_t>();
        bundle.finetune_cfg.learning_rate = fc.at("learning_rate").get<double>();
        bundle.finetune_cfg.seed = fc.at("seed").get<std::uint64_t>();

        const std::uint64_t declared = header.at("blob_checksum_fnv1a").get<std::uint64_t>();
        const std::uint64_t actual =
            fnv1a(reinterpret_cast<const unsigned char*>(blob.data()), blob.size());
        if (declared != actual) throw IoError("bundle: " + path + " numeric block checksum mismatch");
    } catch (const json::exception& e) {
        throw IoError("bundle: malformed header in " + path + ": " + e.what());
    }

    BlobReader reader(blob);
    reader.read_f64(bundle.scaler.mu.data(), bundle.scaler.mu.size());
    reader.read_f64(bundle.scaler.sigma.data(), bundle.scaler.sigma.size());
    for (auto& layer : bundle.extractor.layers()) read_layer_params(reader, layer);
    if (bundle.has_head) read_layer_params(reader, bundle.head);
    if (!reader.exhausted()) {
        throw IoError("bundle: " + path + " numeric block longer than the parameters require");
    }
    return bundle;
}

} // namespace ckan
