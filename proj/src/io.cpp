#include "sfp/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sfp/errors.hpp"

namespace sfp::io {

namespace {

namespace fs = std::filesystem;

void write_f64le(const std::string& path, const double* data, std::size_t count) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    // the target platforms here are little-endian; written as raw doubles
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

std::vector<double> read_f64le(const std::string& path, std::size_t expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
    std::vector<double> data(expected);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(expected * 8));
    if (static_cast<std::size_t>(in.gcount()) != expected * 8) {
        throw Error(ErrorCode::FormatError, "truncated blob " + path);
    }
    return data;
}

void write_u8(const std::string& path, const std::vector<std::uint8_t>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
}

std::vector<std::uint8_t> read_u8(const std::string& path, std::size_t expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
    std::vector<std::uint8_t> data(expected);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(expected));
    if (static_cast<std::size_t>(in.gcount()) != expected) {
        throw Error(ErrorCode::FormatError, "truncated blob " + path);
    }
    return data;
}

double parse_double(const KeyValues& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::FormatError, "missing meta key " + key);
    return std::stod(it->second);
}

std::uint64_t parse_u64(const KeyValues& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::FormatError, "missing meta key " + key);
    return std::stoull(it->second);
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

KeyValues read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
    KeyValues kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::FormatError, "bad config line: " + line);
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

void write_key_values(const std::string& path, const KeyValues& kv) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    for (const auto& [key, value] : kv) out << key << "=" << value << "\n";
}

bool file_exists(const std::string& path) { return fs::exists(path); }

void ensure_directory(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create directory " + path);
}

void save_environment(const std::string& dir, const datasets::Environment& env) {
    ensure_directory(dir);
    KeyValues meta;
    meta["n"] = std::to_string(env.size());
    meta["d"] = std::to_string(env.data.cols());
    meta["bias_ratio"] = format_double(env.bias_ratio);
    meta["seed"] = std::to_string(env.seed);
    meta["classes"] = std::to_string(env.classes);
    meta["kind"] = env.kind == datasets::EnvKind::Image ? "image" : "features";
    {
        std::ostringstream palette;
        for (std::size_t k = 0; k < env.palette.colors.size(); ++k) {
            for (int c = 0; c < 3; ++c) {
                if (k + c > 0) palette << ",";
                palette << format_double(env.palette.colors[k][static_cast<std::size_t>(c)]);
            }
        }
        meta["palette"] = palette.str();
    }
    meta["has_targets"] = env.targets.empty() ? "0" : "1";
    if (!env.targets.empty()) meta["target_cols"] = std::to_string(env.targets.cols());
    write_key_values(dir + "/meta", meta);

    write_f64le(dir + "/data.f64le", env.data.data(), env.data.size());
    std::vector<std::uint8_t> labels(env.labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        labels[i] = static_cast<std::uint8_t>(env.labels[i]);
    }
    write_u8(dir + "/labels.u8", labels);
    write_u8(dir + "/idmask.u8", env.id_mask);
    if (!env.targets.empty()) {
        write_f64le(dir + "/targets.f64le", env.targets.data(), env.targets.size());
    }
}

datasets::Environment load_environment(const std::string& dir) {
    const KeyValues meta = read_key_values(dir + "/meta");
    const std::size_t n = parse_u64(meta, "n");
    const std::size_t d = parse_u64(meta, "d");

    datasets::Environment env;
    env.bias_ratio = parse_double(meta, "bias_ratio");
    env.seed = parse_u64(meta, "seed");
    env.classes = static_cast<int>(parse_u64(meta, "classes"));
    env.kind = meta.at("kind") == "image" ? datasets::EnvKind::Image : datasets::EnvKind::Features;
    {
        std::istringstream palette(meta.at("palette"));
        std::string tok;
        for (std::size_t k = 0; k < 10; ++k) {
            for (int c = 0; c < 3; ++c) {
                if (!std::getline(palette, tok, ',')) {
                    throw Error(ErrorCode::FormatError, "bad palette in meta");
                }
                env.palette.colors[k][static_cast<std::size_t>(c)] = std::stod(tok);
            }
        }
    }
    env.data = Matrix(n, d, read_f64le(dir + "/data.f64le", n * d));
    const auto labels = read_u8(dir + "/labels.u8", n);
    env.labels.assign(labels.begin(), labels.end());
    env.id_mask = read_u8(dir + "/idmask.u8", n);
    if (meta.count("has_targets") && meta.at("has_targets") == "1") {
        const std::size_t c = parse_u64(meta, "target_cols");
        env.targets = Matrix(n, c, read_f64le(dir + "/targets.f64le", n * c));
    }
    return env;
}

void save_model(const std::string& dir, const models::ModelState& state) {
    ensure_directory(dir);
    KeyValues meta;
    meta["kind"] = state.spec.kind == models::ModelKind::Linear ? "linear" : "mlp";
    meta["input_dim"] = std::to_string(state.spec.input_dim);
    meta["feature_dim"] = std::to_string(state.spec.feature_dim);
    meta["classes"] = std::to_string(state.spec.classes);
    meta["step"] = std::to_string(state.step);
    write_key_values(dir + "/meta", meta);

    std::ofstream manifest(dir + "/manifest");
    if (!manifest) throw Error(ErrorCode::IoError, "cannot write manifest");
    manifest << "w " << state.w.rows() << " " << state.w.cols() << "\n";
    write_f64le(dir + "/w.f64le", state.w.data(), state.w.size());
    if (state.spec.kind == models::ModelKind::Mlp) {
        manifest << "b1 " << state.b1.size() << " 1\n";
        manifest << "head " << state.head.rows() << " " << state.head.cols() << "\n";
        manifest << "b2 " << state.b2.size() << " 1\n";
        write_f64le(dir + "/b1.f64le", state.b1.data(), state.b1.size());
        write_f64le(dir + "/head.f64le", state.head.data(), state.head.size());
        write_f64le(dir + "/b2.f64le", state.b2.data(), state.b2.size());
    }
}

models::ModelState load_model(const std::string& dir) {
    const KeyValues meta = read_key_values(dir + "/meta");
    models::ModelState state;
    state.spec.kind =
        meta.at("kind") == "linear" ? models::ModelKind::Linear : models::ModelKind::Mlp;
    state.spec.input_dim = parse_u64(meta, "input_dim");
    state.spec.feature_dim = parse_u64(meta, "feature_dim");
    state.spec.classes = parse_u64(meta, "classes");
    state.step = static_cast<long>(parse_u64(meta, "step"));

    state.w = Matrix(state.spec.feature_dim, state.spec.input_dim,
                     read_f64le(dir + "/w.f64le", state.spec.feature_dim * state.spec.input_dim));
    if (state.spec.kind == models::ModelKind::Mlp) {
        state.b1 = read_f64le(dir + "/b1.f64le", state.spec.feature_dim);
        state.head = Matrix(state.spec.classes, state.spec.feature_dim,
                            read_f64le(dir + "/head.f64le",
                                       state.spec.classes * state.spec.feature_dim));
        state.b2 = read_f64le(dir + "/b2.f64le", state.spec.classes);
    }
    return state;
}

void save_sparse_model(const std::string& dir, const train::SparseModel& model) {
    save_model(dir, model.base);
    KeyValues meta = read_key_values(dir + "/meta");
    meta["theta"] = std::to_string(model.theta);
    write_key_values(dir + "/meta", meta);
    write_f64le(dir + "/kept_basis.f64le", model.kept_basis.data(), model.kept_basis.size());
    std::ofstream manifest(dir + "/manifest", std::ios::app);
    manifest << "kept_basis " << model.kept_basis.rows() << " " << model.kept_basis.cols() << "\n";
}

void write_trace_csv(const std::string& path, const train::TrainTrace& trace) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << "epoch,loss_id,loss_ood,sigma_hat,delta,identified_frac,train_acc,test_acc\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& r = trace[i];
        out << i << "," << format_double(r.loss_id) << "," << format_double(r.loss_ood) << ","
            << format_double(r.sigma_hat) << "," << format_double(r.delta) << ","
            << format_double(r.identified_frac) << "," << format_double(r.train_acc) << ","
            << format_double(r.test_acc) << "\n";
    }
}

void write_trajectory_csv(const std::string& path, const subspace::SimulationResult& sim,
                          double gap_predicted) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << "step,loss_id,loss_ood,gap_measured,gap_predicted\n";
    for (std::size_t t = 0; t < sim.steps.size(); ++t) {
        const auto& s = sim.steps[t];
        out << t << "," << format_double(s.loss_id) << "," << format_double(s.loss_ood) << ","
            << format_double(s.loss_ood - s.loss_id) << "," << format_double(gap_predicted)
            << "\n";
    }
}

void append_summary_csv(const std::string& path, const RunSummary& summary) {
    const bool fresh = !file_exists(path);
    std::ofstream out(path, std::ios::app);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    if (fresh) {
        out << "method,seed,dataset,train_acc,test_acc,test_acc_pruned,theta,wall_seconds\n";
    }
    out << summary.method << "," << summary.seed << "," << summary.dataset << ","
        << format_double(summary.train_acc) << "," << format_double(summary.test_acc) << ","
        << format_double(summary.test_acc_pruned) << "," << summary.theta << ","
        << format_double(summary.wall_seconds) << "\n";
}

std::vector<RunSummary> read_summary_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
    std::vector<RunSummary> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;
            continue;
        }
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string tok;
        RunSummary s;
        std::getline(row, s.method, ',');
        std::getline(row, tok, ',');
        s.seed = std::stoull(tok);
        std::getline(row, s.dataset, ',');
        std::getline(row, tok, ',');
        s.train_acc = std::stod(tok);
        std::getline(row, tok, ',');
        s.test_acc = std::stod(tok);
        std::getline(row, tok, ',');
        s.test_acc_pruned = std::stod(tok);
        std::getline(row, tok, ',');
        s.theta = std::stoull(tok);
        if (std::getline(row, tok, ',')) s.wall_seconds = std::stod(tok);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace sfp::io
