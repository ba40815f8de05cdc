#ifndef SFP_IO_HPP
#define SFP_IO_HPP

#include <map>
#include <string>
#include <vector>

#include "sfp/datasets.hpp"
#include "sfp/models.hpp"
#include "sfp/subspace.hpp"
#include "sfp/train.hpp"

namespace sfp::io {

/// Flat key=value text config. Lines starting with '#' and blank lines are
/// skipped; later keys win.
using KeyValues = std::map<std::string, std::string>;

KeyValues read_key_values(const std::string& path);
void write_key_values(const std::string& path, const KeyValues& kv);

/// Environment directory layout:
///   meta         key=value (n, d, bias_ratio, seed, palette, ...)
///   data.f64le   row-major 64-bit little-endian floats
///   labels.u8    one byte per sample
///   idmask.u8    one byte per sample
///   targets.f64le  present only for regression environments
void save_environment(const std::string& dir, const datasets::Environment& env);
datasets::Environment load_environment(const std::string& dir);

/// Model checkpoint directory: meta (spec + step), manifest (tensor name +
/// shape per line), one .f64le blob per tensor.
void save_model(const std::string& dir, const models::ModelState& state);
models::ModelState load_model(const std::string& dir);

void save_sparse_model(const std::string& dir, const train::SparseModel& model);

/// Columns: epoch, loss_id, loss_ood, sigma_hat, delta, identified_frac,
/// train_acc, test_acc.
void write_trace_csv(const std::string& path, const train::TrainTrace& trace);

/// Columns: step, loss_id, loss_ood, gap_measured, gap_predicted.
void write_trajectory_csv(const std::string& path, const subspace::SimulationResult& sim,
                          double gap_predicted);

/// One run summary record (appended as one CSV row; the header is written
/// when the file does not exist yet).
struct RunSummary {
    std::string method;
    std::uint64_t seed = 0;
    std::string dataset;
    double train_acc = 0.0;
    double test_acc = 0.0;
    double test_acc_pruned = -1.0;  // -1 when no pruning ran
    std::size_t theta = 0;
    double wall_seconds = 0.0;
};

void append_summary_csv(const std::string& path, const RunSummary& summary);
std::vector<RunSummary> read_summary_csv(const std::string& path);

bool file_exists(const std::string& path);
void ensure_directory(const std::string& path);

std::string format_double(double v);

}  // namespace sfp::io

#endif  // SFP_IO_HPP
