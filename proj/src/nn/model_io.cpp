#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "rffi/neural.hpp"

namespace rffi {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'R', 'F', 'F', 'I', 'M', 'D', 'L', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& o, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    o.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& i) {
    unsigned char b[4];
    if (!i.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated model file");
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

void put_floats(std::ostream& o, const std::vector<double>& v) {
    for (double d : v) put_u32(o, std::bit_cast<std::uint32_t>(static_cast<float>(d)));
}

void get_floats(std::istream& i, std::vector<double>& v) {
    for (auto& d : v) d = static_cast<double>(std::bit_cast<float>(get_u32(i)));
}

json classifier_json(const ClassifierConfig& c) {
    return {{"input_len", c.input_len},   {"conv_filters", c.conv_filters},
            {"kernel", c.kernel},         {"stride", c.stride},
            {"padding", c.padding},       {"leaky_slope", c.leaky_slope},
            {"pool", c.pool},             {"classes", c.classes},
            {"l2_strength", c.l2_strength}, {"lr", c.lr},
            {"lr_decay_every", c.lr_decay_every}, {"lr_decay_factor", c.lr_decay_factor},
            {"epochs", c.epochs},         {"batch", c.batch}};
}

ClassifierConfig classifier_from(const json& j) {
    ClassifierConfig c;
    c.input_len = j.at("input_len");
    c.conv_filters = j.at("conv_filters").get<std::vector<int>>();
    c.kernel = j.at("kernel");
    c.stride = j.at("stride");
    c.padding = j.at("padding");
    c.leaky_slope = j.at("leaky_slope");
    c.pool = j.at("pool");
    c.classes = j.at("classes");
    c.l2_strength = j.at("l2_strength");
    c.lr = j.at("lr");
    c.lr_decay_every = j.at("lr_decay_every");
    c.lr_decay_factor = j.at("lr_decay_factor");
    c.epochs = j.at("epochs");
    c.batch = j.at("batch");
    return c;
}

json tcnn_json(const TcnnConfig& c) {
    return {{"input_dim", c.input_dim}, {"hidden", c.hidden}, {"output_dim", c.output_dim},
            {"leaky_slope", c.leaky_slope}, {"lr", c.lr}, {"epochs", c.epochs}, {"batch", c.batch}};
}

TcnnConfig tcnn_from(const json& j) {
    TcnnConfig c;
    c.input_dim = j.at("input_dim");
    c.hidden = j.at("hidden").get<std::vector<int>>();
    c.output_dim = j.at("output_dim");
    c.leaky_slope = j.at("leaky_slope");
    c.lr = j.at("lr");
    c.epochs = j.at("epochs");
    c.batch = j.at("batch");
    return c;
}

}  // namespace

void save_model(const ModelState& model, const std::string& path) {
    auto& net = const_cast<nn::Sequential&>(model.net);
    json h;
    h["kind"] = to_string(model.kind);
    h["config"] = model.kind == ModelKind::dsqcnn ? classifier_json(model.classifier) : tcnn_json(model.tcnn);
    h["representation"] = model.representation;
    h["seed"] = model.seed;
    h["epoch"] = model.epoch;
    h["adam_step"] = model.adam_step;
    h["best_epoch"] = model.best_epoch;
    h["loss_history"] = model.loss_history;
    h["val_history"] = model.val_history;
    json ps = json::array();
    for (auto* p : net.params()) ps.push_back({{"name", p->name}, {"shape", p->value.shape}});
    h["params"] = ps;
    json bs = json::array();
    for (auto* b : net.buffers()) bs.push_back({{"name", b->name}, {"shape", b->value.shape}});
    h["buffers"] = bs;
    h["blob"] = "float32 little-endian; per param: value, adam m, adam v; then buffers";
    const std::string text = h.dump();

    std::ofstream o(path, std::ios::binary);
    if (!o) throw IoError("cannot write " + path);
    o.write(kMagic, 8);
    put_u32(o, kVersion);
    put_u32(o, static_cast<std::uint32_t>(text.size()));
    o.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (auto* p : net.params()) {
        put_floats(o, p->value.data);
        put_floats(o, p->m.data);
        put_floats(o, p->v.data);
    }
    for (auto* b : net.buffers()) put_floats(o, b->value.data);
    if (!o) throw IoError("write failed: " + path);
}

ModelState load_model(const std::string& path) {
    std::ifstream i(path, std::ios::binary);
    if (!i) throw IoError("cannot open " + path);
    char magic[8];
    if (!i.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw FormatError("not a model file: " + path);
    if (get_u32(i) != kVersion) throw FormatError("unsupported model version");
    const std::uint32_t len = get_u32(i);
    std::string text(len, '\0');
    if (!i.read(text.data(), len)) throw FormatError("truncated model header");
    json h;
    try {
        h = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad model header: ") + e.what());
    }
    const std::string kind = h.at("kind");
    ModelState m = kind == "dsqcnn" ? build_dsqcnn(classifier_from(h.at("config")), 0)
                   : kind == "tcnn" ? build_tcnn(tcnn_from(h.at("config")), 0)
                                    : throw FormatError("unknown model kind " + kind);
    m.representation = h.at("representation");
    m.seed = h.at("seed");
    m.epoch = h.at("epoch");
    m.adam_step = h.at("adam_step");
    m.best_epoch = h.at("best_epoch");
    m.loss_history = h.at("loss_history").get<std::vector<double>>();
    m.val_history = h.at("val_history").get<std::vector<double>>();
    auto params = m.net.params();
    if (h.at("params").size() != params.size()) throw FormatError("parameter count mismatch");
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (h["params"][k].at("shape").get<std::vector<int>>() != params[k]->value.shape)
            throw FormatError("parameter shape mismatch: " + params[k]->name);
        get_floats(i, params[k]->value.data);
        get_floats(i, params[k]->m.data);
        get_floats(i, params[k]->v.data);
    }
    for (auto* b : m.net.buffers()) get_floats(i, b->value.data);
    if (i.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in model file");
    return m;
}

}  // namespace rffi
