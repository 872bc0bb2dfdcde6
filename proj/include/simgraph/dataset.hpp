#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "simgraph/common.hpp"

namespace simgraph {

/// Row-major matrix with a fixed row width.
template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), data_(rows * dim) {}
    Matrix(std::size_t rows, std::size_t dim, std::vector<T> data)
        : rows_(rows), dim_(dim), data_(std::move(data)) {
        if (data_.size() != rows_ * dim_) throw DataError("matrix data size does not match shape");
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t dim() const noexcept { return dim_; }
    bool empty() const noexcept { return rows_ == 0; }

    std::span<const T> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    std::span<T> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

    const std::vector<T>& data() const noexcept { return data_; }

    void append_row(std::span<const T> values) {
        if (rows_ == 0 && dim_ == 0) dim_ = values.size();
        if (values.size() != dim_) throw DataError("appended row has wrong width");
        data_.insert(data_.end(), values.begin(), values.end());
        ++rows_;
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t dim_ = 0;
    std::vector<T> data_;
};

using FloatMatrix = Matrix<float>;
using IntMatrix = Matrix<std::int32_t>;

// fvecs / ivecs: back-to-back records of [int32 dim][dim x 4-byte payload], little-endian.
FloatMatrix load_fvecs(const std::filesystem::path& path);
IntMatrix load_ivecs(const std::filesystem::path& path);
FloatMatrix parse_fvecs(std::span<const std::uint8_t> bytes);
IntMatrix parse_ivecs(std::span<const std::uint8_t> bytes);
void write_fvecs(const std::filesystem::path& path, const FloatMatrix& m);
void write_ivecs(const std::filesystem::path& path, const IntMatrix& m);

/// Query vectors plus their exact nearest base ids (empty until computed).
struct QuerySet {
    FloatMatrix vectors;
    std::vector<VertexId> gt;
    std::vector<std::int32_t> labels;  // synthetic cluster of origin, if known

    std::size_t size() const noexcept { return vectors.rows(); }
    bool operator==(const QuerySet&) const = default;
};

struct Dataset {
    FloatMatrix base;
    std::vector<std::int32_t> base_labels;
    QuerySet train;
    QuerySet val;
    QuerySet test;

    std::size_t dim() const noexcept { return base.dim(); }
    std::size_t size() const noexcept { return base.rows(); }

    /// Throws DataError if dims disagree, base is empty or any gt id is out of range.
    void validate() const;
    bool operator==(const Dataset&) const = default;
};

/// Index of the nearest base row (squared L2) for every query; ties go to the lowest index.
std::vector<VertexId> brute_force_gt(const FloatMatrix& base, const FloatMatrix& queries,
                                     std::size_t threads = 1);

/// Fills gt for every split of the dataset.
void compute_ground_truth(Dataset& ds, std::size_t threads = 1);

/// Base index minimizing the sum of Euclidean distances to all base rows.
VertexId medoid(const FloatMatrix& base);

struct QueryCounts {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
};

/// Gaussian blobs around `n_clusters` centers drawn uniformly from the unit cube.
/// Queries come from the same mixture. Ground truth is not computed here.
Dataset synth_clusters(std::size_t n_clusters, std::size_t per_cluster, std::size_t dim,
                       float spread, std::uint64_t seed, QueryCounts counts);

/// Same as above with query splits sized 10x / 2x / 2x the base.
Dataset synth_clusters(std::size_t n_clusters, std::size_t per_cluster, std::size_t dim,
                       float spread, std::uint64_t seed);

/// Drops rows of `queries` that are bit-identical to any row of `reference`.
/// Returns the number of removed rows. gt/labels are filtered alongside.
std::size_t remove_exact_duplicates(QuerySet& queries, const FloatMatrix& reference);

} // namespace simgraph
