#ifndef SFP_DATASETS_HPP
#define SFP_DATASETS_HPP

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sfp/matrix.hpp"
#include "sfp/subspace.hpp"

namespace sfp::datasets {

enum class EnvKind { Image, Features };

/// Ten background colors, one per class.
struct Palette {
    std::array<std::array<double, 3>, 10> colors;

    /// Ten maximally separated hues at full saturation and value.
    static Palette standard();
};

/// One training or evaluation world. `id_mask[i]` marks sample i as biased
/// (its spurious channel is tied to the label). `targets` is present for
/// regression-style synthetic tasks and empty otherwise. Image
/// environments keep the palette they were composited with so later
/// rebalancing can redraw backgrounds consistently.
struct Environment {
    EnvKind kind = EnvKind::Features;
    Matrix data;                        // n x d
    std::vector<int> labels;            // n, values in [0, classes)
    std::vector<std::uint8_t> id_mask;  // n
    Matrix targets;                     // n x C or empty
    double bias_ratio = 0.0;
    std::uint64_t seed = 0;
    int classes = 0;
    Palette palette = Palette::standard();

    std::size_t size() const { return data.rows(); }
    double id_fraction() const;
};

/// Ground truth of a generated two-environment linear world. The feature
/// bases are mutually orthogonal blocks of R^d: spurious (ID-only),
/// unknown (OOD-only) and invariant (shared, label-carrying).
struct SyntheticLinearTask {
    Matrix w_star;    // C x d, rows inside span(in_block)
    Matrix f_prime;   // d x d_spurious
    Matrix g_prime;   // d x d_unknown
    Matrix in_block;  // d x d_invariant
    subspace::DomainSpec spec;
    Matrix a_star;  // coordinates of W* in the ID frame [f_prime | in_block]
    Matrix b_star;  // coordinates of W* in the OOD frame [g_prime | in_block]
};

struct LinearTaskBundle {
    SyntheticLinearTask task;
    Environment train;
    Environment test_ood;
};

/// Reads an IDX image/label file pair (big-endian; magics 0x803/0x801).
/// Pixels are scaled to [0,1]. Throws FormatError on bad magic or a
/// truncated payload, InconsistentFiles when the item counts differ.
std::pair<Matrix, std::vector<int>> load_idx(const std::string& images_path,
                                             const std::string& labels_path);

/// Composites grayscale digits (n x 784, values in [0,1]) over colored
/// backgrounds. A biased sample gets palette[label]; an unbiased one draws
/// its background uniformly from the palette. Foreground pixels
/// (intensity > 0.5) render white. Output dimension is 28*28*3
/// (interleaved RGB). Exactly round(bias_ratio * n) samples are biased,
/// chosen by seeded shuffle.
Environment build_colored_mnist(const Matrix& images, const std::vector<int>& labels,
                                double bias_ratio, const Palette& palette, std::uint64_t seed);

/// Procedural 28x28 digit glyphs (jittered bitmap font), a stand-in base
/// set for environments where no IDX files are available.
std::pair<Matrix, std::vector<int>> render_digit_glyphs(std::size_t n, std::uint64_t seed);

/// Generates the two-environment linear world. ID samples live in
/// span(f_prime, in_block), OOD samples in span(g_prime, in_block);
/// regression targets are W* x + noise and class labels derive from the
/// invariant coordinates only. ambient_dim == 0 means exactly the sum of
/// the block dimensions.
LinearTaskBundle gen_linear_task(std::size_t d_spurious, std::size_t d_unknown,
                                 std::size_t d_invariant, double p_i, double p_o,
                                 std::size_t n, double noise_std, std::uint64_t seed,
                                 std::size_t classes = 3, std::size_t ambient_dim = 0);

/// Splits an environment into disjoint parts and rebalances each to its
/// target bias ratio: image environments redraw backgrounds, feature
/// environments redistribute samples between the ID/OOD pools. Throws
/// InsufficientData when the pools cannot satisfy the requested ratios.
std::vector<Environment> split_environments(const Environment& env,
                                            const std::vector<double>& ratios,
                                            std::uint64_t seed);

}  // namespace sfp::datasets

#endif  // SFP_DATASETS_HPP
