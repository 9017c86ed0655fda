#include "unibias/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "unibias/errors.hpp"

namespace unibias {

namespace {

// Reads keys of one mapping and rejects anything it was not asked about.
class Section {
public:
    Section(YAML::Node node, std::string prefix) : node_(std::move(node)), prefix_(std::move(prefix)) {
        if (node_ && !node_.IsNull() && !node_.IsMap()) {
            throw ValidationError(prefix_.empty() ? "<root>" : prefix_.substr(0, prefix_.size() - 1),
                                  "expected a mapping");
        }
    }

    bool present() const { return node_ && node_.IsMap(); }
    bool has(const std::string& key) const { return present() && node_[key]; }
    std::string key(const std::string& name) const { return prefix_ + name; }

    template <class T>
    bool get(const std::string& name, T& out, const char* type) {
        seen_.insert(name);
        if (!has(name)) return false;
        try {
            out = node_[name].as<T>();
        } catch (const YAML::Exception&) {
            throw ValidationError(key(name), std::string("expected ") + type);
        }
        return true;
    }

    bool get_real(const std::string& name, double& out) { return get(name, out, "a real number"); }
    bool get_int(const std::string& name, int& out) { return get(name, out, "an integer"); }
    bool get_long(const std::string& name, long& out) { return get(name, out, "an integer"); }
    bool get_bool(const std::string& name, bool& out) { return get(name, out, "true or false"); }
    bool get_string(const std::string& name, std::string& out) { return get(name, out, "a string"); }

    Section child(const std::string& name) {
        seen_.insert(name);
        return Section(present() ? node_[name] : YAML::Node(), key(name) + ".");
    }

    void finish() const {
        if (!present()) return;
        for (const auto& kv : node_) {
            const auto name = kv.first.as<std::string>();
            if (!seen_.count(name)) throw ValidationError(key(name), "unknown key");
        }
    }

private:
    YAML::Node node_;
    std::string prefix_;
    std::set<std::string> seen_;
};

template <class E>
E parse_enum(const std::string& key, const std::string& value,
             std::initializer_list<std::pair<const char*, E>> options) {
    std::string allowed;
    for (const auto& [name, e] : options) {
        if (value == name) return e;
        allowed += allowed.empty() ? name : std::string(" | ") + name;
    }
    throw ValidationError(key, "expected one of " + allowed + ", got '" + value + "'");
}

void set_path(YAML::Node node, const std::vector<std::string>& parts, std::size_t i, const YAML::Node& value,
              const std::string& full) {
    if (!node.IsMap() && !node.IsNull()) throw ValidationError(full, "parent is not a mapping");
    if (i + 1 == parts.size()) {
        node[parts[i]] = value;
        return;
    }
    YAML::Node child = node[parts[i]];
    if (!child.IsDefined() || child.IsNull()) {
        node[parts[i]] = YAML::Node(YAML::NodeType::Map);
        child = node[parts[i]];
    }
    set_path(child, parts, i + 1, value, full);
}

void apply_override(YAML::Node& root, const Override& ov) {
    std::vector<std::string> parts;
    std::stringstream ss(ov.first);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (part.empty()) throw ValidationError(ov.first, "malformed override key");
        parts.push_back(part);
    }
    if (parts.empty()) throw ValidationError(ov.first, "empty override key");
    YAML::Node value;
    try {
        value = YAML::Load(ov.second);
    } catch (const YAML::Exception&) {
        throw ValidationError(ov.first, "cannot parse override value '" + ov.second + "'");
    }
    set_path(root, parts, 0, value, ov.first);
}

void read_dataset(Section s, ExperimentConfig& c) {
    ScalarData& d = c.scalar;
    s.get_real("sigma_A", d.sigma_A);
    s.get_real("sigma_B", d.sigma_B);
    s.get_real("rho", d.rho);
    s.get_real("w_A", d.w_A);
    s.get_real("w_B", d.w_B);
    s.get_real("noise_std", d.noise_std);
    std::string mode;
    if (s.get_string("label_mode", mode)) {
        c.label_mode = parse_enum<LabelMode>(s.key("label_mode"), mode,
                                             {{"regression", LabelMode::Regression}, {"sign", LabelMode::Sign}});
    }
    std::vector<std::vector<double>> sigma;
    if (s.get("sigma", sigma, "a list of rows")) {
        c.scalar_dataset = false;
        int dims_A = 1;
        s.get_int("dims_A", dims_A);
        const int d = static_cast<int>(sigma.size());
        Matrix m(d, d);
        for (int i = 0; i < d; ++i) {
            if (static_cast<int>(sigma[i].size()) != d) throw ValidationError(s.key("sigma"), "must be square");
            for (int j = 0; j < d; ++j) m(i, j) = sigma[i][j];
        }
        std::vector<double> wa, wb;
        if (!s.get("w_star_A", wa, "a list of reals")) throw ValidationError(s.key("w_star_A"), "required with sigma");
        if (!s.get("w_star_B", wb, "a list of reals")) throw ValidationError(s.key("w_star_B"), "required with sigma");
        c.dataset.dims_A = dims_A;
        c.dataset.dims_B = d - dims_A;
        c.dataset.sigma = m;
        c.dataset.w_star_A = Eigen::Map<RowVector>(wa.data(), static_cast<long>(wa.size()));
        c.dataset.w_star_B = Eigen::Map<RowVector>(wb.data(), static_cast<long>(wb.size()));
        c.dataset.noise_std = d > 0 ? c.scalar.noise_std : 0.0;
        c.dataset.label_mode = c.label_mode;
        if (c.dataset.dims_B < 1) throw ValidationError(s.key("dims_A"), "must be smaller than the size of sigma");
        c.dataset.validate();
    } else {
        int ignored = 0;
        s.get_int("dims_A", ignored);
        std::vector<double> unused;
        s.get("w_star_A", unused, "a list of reals");
        s.get("w_star_B", unused, "a list of reals");
    }
    s.finish();
}

void read_network(Section s, FusionConfig& n) {
    s.get_int("L", n.L);
    s.get_int("L_f", n.L_f);
    s.get_int("width", n.width);
    std::string v;
    if (s.get_string("activation", v)) {
        n.activation = parse_enum<Activation>(s.key("activation"), v,
                                              {{"linear", Activation::Linear}, {"relu", Activation::Relu}});
    }
    if (s.get_string("init", v)) {
        n.init.kind = parse_enum<InitKind>(s.key("init"), v,
                                           {{"gaussian", InitKind::Gaussian}, {"norm_exact", InitKind::NormExact}});
    }
    s.get_real("init_scale", n.init.scale);
    s.get_real("post_gain", n.init.post_gain);
    long seed = static_cast<long>(n.seed);
    if (s.get_long("seed", seed)) n.seed = static_cast<std::uint64_t>(seed);
    s.finish();
}

void read_training(Section s, TrainConfig& t, long& samples) {
    s.get_real("eta", t.eta);
    s.get_long("max_steps", t.max_steps);
    std::string v;
    if (s.get_string("loss", v)) {
        t.loss_kind = parse_enum<LossKind>(s.key("loss"), v, {{"mse", LossKind::Mse}, {"logistic", LossKind::Logistic}});
    }
    if (s.get_string("drive", v)) {
        t.drive = parse_enum<Drive>(s.key("drive"), v,
                                    {{"correlation", Drive::Correlation}, {"samples", Drive::Samples}});
    }
    s.get_long("record_stride", t.record_stride);
    double stop = t.stop_loss;
    if (s.has("stop_loss")) {
        std::string raw;
        s.get_string("stop_loss", raw);
        if (raw == "inf" || raw == ".inf") {
            stop = std::numeric_limits<double>::infinity();
        } else {
            s.get_real("stop_loss", stop);
        }
    }
    t.stop_loss = stop;
    s.get_bool("record_first_layer", t.record_first_layer);
    s.get_long("samples", samples);
    s.finish();
}

void read_sweep(Section s, SweepSpec& sw) {
    std::string axis;
    if (s.get_string("axis", axis)) {
        try {
            sw.axis = sweep_axis_from_string(axis);
        } catch (const ValidationError&) {
            throw ValidationError(s.key("axis"), "unknown axis '" + axis + "'");
        }
    }
    s.get("grid", sw.grid, "a list of reals");
    std::vector<long> seeds;
    if (s.get("seeds", seeds, "a list of integers")) {
        sw.seeds.clear();
        for (long x : seeds) sw.seeds.push_back(static_cast<std::uint64_t>(x));
    }
    s.finish();
}

void read_genexp(Section s, GenExpSpec& g) {
    s.get_int("dims_A", g.dims_A);
    s.get_int("dims_B", g.dims_B);
    s.get_real("var_A", g.var_A);
    s.get_real("var_B", g.var_B);
    s.get_real("w_star", g.w_star);
    s.get_real("noise_std", g.noise_std);
    s.get_long("P_train", g.P_train);
    s.get_bool("early_stop", g.early_stop);
    long seed = static_cast<long>(g.seed);
    if (s.get_long("seed", seed)) g.seed = static_cast<std::uint64_t>(seed);
    s.get_int("L", g.fusion.L);
    s.get_int("L_f", g.fusion.L_f);
    s.get_int("width", g.fusion.width);
    s.get_real("init_std", g.fusion.init.scale);
    s.get_real("eta", g.train.eta);
    s.get_long("max_steps", g.train.max_steps);
    s.get_long("record_stride", g.train.record_stride);
    s.finish();
}

void read_xor(Section s, XorSpec& x) {
    s.get_real("sigma_A", x.sigma_A);
    std::string fusion;
    if (s.get_string("fusion", fusion)) {
        x.fusion = parse_enum<FusionKind>(s.key("fusion"), fusion,
                                          {{"early", FusionKind::Early}, {"late", FusionKind::Late}});
    }
    long seed = static_cast<long>(x.seed);
    if (s.get_long("seed", seed)) x.seed = static_cast<std::uint64_t>(seed);
    s.get_int("width", x.width);
    s.get_long("samples", x.samples);
    s.get_real("init_std", x.init_std);
    s.get_real("eta", x.eta);
    s.get_long("max_steps", x.max_steps);
    s.get_long("record_stride", x.record_stride);
    s.get_real("stop_loss", x.stop_loss);
    s.finish();
}

}  // namespace

DatasetSpec ExperimentConfig::dataset_spec() const {
    if (scalar_dataset) return scalar.spec(label_mode);
    return dataset;
}

Override parse_override(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValidationError(text, "override must have the form key=value");
    }
    return {text.substr(0, eq), text.substr(eq + 1)};
}

ExperimentConfig parse_config(const std::string& text, const std::vector<Override>& overrides) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ValidationError("<config>", std::string("malformed YAML: ") + e.what());
    }
    if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    for (const auto& ov : overrides) apply_override(root, ov);

    ExperimentConfig c;
    Section top(root, "");
    if (!top.get_int("schema", c.schema)) throw ValidationError("schema", "missing schema version");
    if (c.schema != kConfigSchema) {
        throw ValidationError("schema", "unsupported schema " + std::to_string(c.schema));
    }
    read_dataset(top.child("dataset"), c);
    read_network(top.child("network"), c.network);
    read_training(top.child("training"), c.training, c.samples);
    read_sweep(top.child("sweep"), c.sweep);
    read_genexp(top.child("genexp"), c.genexp);
    read_xor(top.child("xor"), c.xor_spec);
    Section pred = top.child("predict");
    double u0 = 0.0;
    if (pred.get_real("u0", u0)) c.predict_u0 = u0;
    pred.finish();
    top.finish();

    if (c.scalar_dataset) {
        c.network.dims_A = 1;
        c.network.dims_B = 1;
    } else {
        c.network.dims_A = c.dataset.dims_A;
        c.network.dims_B = c.dataset.dims_B;
    }
    c.network.validate();
    c.training.validate();
    if (c.samples < 1) throw ValidationError("training.samples", "must be at least 1");

    c.sweep.data = c.scalar;
    c.sweep.network = c.network;
    c.sweep.train = c.training;
    c.sweep.samples = c.samples;
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<Override>& overrides) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), overrides);
}

}  // namespace unibias
