#ifndef PROXYFAIR_TYPES_HPP
#define PROXYFAIR_TYPES_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

/**
 * @file types.hpp
 *
 * @brief Core value types shared by every stage of the pipeline.
 *
 * All types validate their invariants on construction and are immutable
 * afterwards, so they can be shared freely between threads.
 */

namespace proxyfair {

/// Distinct failure modes of loading or constructing pipeline data.
enum class ErrorKind {
    Io,
    EmptyFile,
    MalformedHeader,
    MalformedValue,
    NonFiniteValue,
    DuplicateId,
    InvalidId,
    DimensionMismatch,
    InvalidCluster,
};

const char* to_string(ErrorKind kind);

class DataError : public std::runtime_error {
public:
    DataError(ErrorKind kind, const std::string& message);
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/**
 * Raised when an operation's parameters are out of domain. `field()` names
 * the offending parameter so that command-line front-ends can point at it.
 */
class ParameterError : public std::invalid_argument {
public:
    ParameterError(std::string field, const std::string& message);
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/**
 * n x d matrix of per-sample feature vectors, stored row-major in double
 * precision. Row i belongs to `ids()[i]`.
 */
class EmbeddingMatrix {
public:
    EmbeddingMatrix(std::vector<std::string> ids, std::vector<double> values, std::size_t dim);

    std::size_t rows() const noexcept { return ids_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<const double> row(std::size_t i) const noexcept {
        return std::span<const double>(values_).subspan(i * dim_, dim_);
    }

private:
    std::vector<std::string> ids_;
    std::vector<double> values_;
    std::size_t dim_;
};

enum class Gender { Female, Male };

const char* to_string(Gender g);

struct MetadataRecord {
    std::optional<Gender> gender;
    std::optional<int> age;
    std::optional<int> label;
    std::optional<int> prediction;
    std::optional<double> score;
};

/// Which optional columns were present in the source table.
struct MetadataColumns {
    bool gender = false;
    bool age = false;
    bool label = false;
    bool prediction = false;
    bool score = false;
};

/**
 * Per-sample records keyed by identifier. True attributes held here are
 * only ever used for validation of proxy groups, never to build them.
 */
class MetadataTable {
public:
    MetadataTable() = default;
    MetadataTable(std::vector<std::string> ids, std::vector<MetadataRecord> records, MetadataColumns columns);

    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const std::vector<MetadataRecord>& records() const noexcept { return records_; }
    const MetadataColumns& columns() const noexcept { return columns_; }

    /// nullptr when the identifier is absent.
    const MetadataRecord* find(const std::string& id) const;

private:
    std::vector<std::string> ids_;
    std::vector<MetadataRecord> records_;
    MetadataColumns columns_;
    std::unordered_map<std::string, std::size_t> index_;
};

/**
 * Metadata aligned to an ordered list of sample identifiers. `rows[i]` points
 * into the source table (nullptr when that sample has no record), so the
 * view must not outlive the table it was built from.
 */
struct JoinedView {
    std::vector<const MetadataRecord*> rows;
    std::vector<std::string> missing_metadata; ///< ids in the sample list without a record
    std::vector<std::string> missing_samples;  ///< ids in the table not among the samples
};

JoinedView join(std::span<const std::string> ids, const MetadataTable& table);
JoinedView join(const EmbeddingMatrix& matrix, const MetadataTable& table);

struct ClusterParams {
    double eps = 0;
    std::size_t min_samples = 1;
};

/// Throws ParameterError unless eps > 0 and min_samples >= 1.
void validate(const ClusterParams& params);

inline constexpr int kNoise = -1;

/**
 * Per-sample proxy group label. Labels other than kNoise form the contiguous
 * range 0..K-1 and every label in that range has at least one member.
 */
class ClusterAssignment {
public:
    ClusterAssignment(std::vector<std::string> ids, std::vector<int> labels,
                      std::optional<ClusterParams> params = std::nullopt);

    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    const std::optional<ClusterParams>& params() const noexcept { return params_; }

    std::size_t cluster_count() const noexcept { return cluster_count_; }
    std::size_t noise_count() const noexcept;

    /// Row indices of every member of `cluster`, in input order.
    std::vector<std::size_t> members(int cluster) const;

private:
    std::vector<std::string> ids_;
    std::vector<int> labels_;
    std::optional<ClusterParams> params_;
    std::size_t cluster_count_ = 0;
};

struct Point2 {
    double x = 0;
    double y = 0;
};

/// 2-D map coordinates aligned with the rows of the source matrix.
class ReducedCoordinates {
public:
    ReducedCoordinates(std::vector<std::string> ids, std::vector<Point2> coords);

    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const std::vector<Point2>& coords() const noexcept { return coords_; }

private:
    std::vector<std::string> ids_;
    std::vector<Point2> coords_;
};

struct SubsetSelection {
    std::vector<std::string> selected_ids;
    /// Cluster of each selected sample, parallel to selected_ids; empty when
    /// the selection was made without a cluster assignment.
    std::vector<int> selected_clusters;
    std::map<int, std::size_t> per_cluster_take;
    std::uint64_t seed = 0;
    double fraction = 1.0;
    std::size_t target_total = 0;
    /// Target exceeded the available population; everything available was taken.
    bool shortfall = false;
};

/// Throws DataError(DuplicateId / InvalidId) when ids are not unique and non-empty.
void validate_ids(std::span<const std::string> ids);

} // namespace proxyfair

#endif
