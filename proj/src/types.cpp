#include "proxyfair/types.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace proxyfair {

const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::EmptyFile: return "empty-file";
    case ErrorKind::MalformedHeader: return "malformed-header";
    case ErrorKind::MalformedValue: return "malformed-value";
    case ErrorKind::NonFiniteValue: return "non-finite-value";
    case ErrorKind::DuplicateId: return "duplicate-id";
    case ErrorKind::InvalidId: return "invalid-id";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::InvalidCluster: return "invalid-cluster";
    }
    return "unknown";
}

DataError::DataError(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

ParameterError::ParameterError(std::string field, const std::string& message)
    : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

const char* to_string(Gender g) {
    return g == Gender::Female ? "F" : "M";
}

void validate_ids(std::span<const std::string> ids) {
    std::unordered_set<std::string_view> seen;
    seen.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& id = ids[i];
        if (id.empty()) {
            throw DataError(ErrorKind::InvalidId, "row " + std::to_string(i + 1) + ": empty id");
        }
        // ids travel through CSV and a u16 length prefix in femb
        if (id.size() > 0xFFFF || id.find_first_of(",\"\r\n") != std::string::npos) {
            throw DataError(ErrorKind::InvalidId, "row " + std::to_string(i + 1) + ": id '" + id +
                                                      "' contains a delimiter or exceeds 65535 bytes");
        }
        if (!seen.insert(id).second) {
            throw DataError(ErrorKind::DuplicateId, "row " + std::to_string(i + 1) + ": duplicate id '" + id + "'");
        }
    }
}

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> ids, std::vector<double> values, std::size_t dim)
    : ids_(std::move(ids)), values_(std::move(values)), dim_(dim) {
    if (ids_.empty()) {
        throw DataError(ErrorKind::EmptyFile, "embedding matrix has no rows");
    }
    if (dim_ == 0) {
        throw DataError(ErrorKind::DimensionMismatch, "embedding dimension must be at least 1");
    }
    if (values_.size() != ids_.size() * dim_) {
        throw DataError(ErrorKind::DimensionMismatch,
                        "expected " + std::to_string(ids_.size() * dim_) + " values, got " +
                            std::to_string(values_.size()));
    }
    validate_ids(ids_);
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (!std::isfinite(values_[k])) {
            throw DataError(ErrorKind::NonFiniteValue, "row " + std::to_string(k / dim_ + 1) + ", column e" +
                                                           std::to_string(k % dim_) + ": non-finite value");
        }
    }
}

MetadataTable::MetadataTable(std::vector<std::string> ids, std::vector<MetadataRecord> records,
                             MetadataColumns columns)
    : ids_(std::move(ids)), records_(std::move(records)), columns_(columns) {
    if (ids_.size() != records_.size()) {
        throw DataError(ErrorKind::DimensionMismatch, "metadata ids and records differ in length");
    }
    validate_ids(ids_);
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        const auto where = "metadata row " + std::to_string(i + 1) + ": ";
        if (r.age && (*r.age < 0 || *r.age > 130)) {
            throw DataError(ErrorKind::MalformedValue, where + "age outside [0, 130]");
        }
        if (r.label && *r.label != 0 && *r.label != 1) {
            throw DataError(ErrorKind::MalformedValue, where + "label must be 0 or 1");
        }
        if (r.prediction && *r.prediction != 0 && *r.prediction != 1) {
            throw DataError(ErrorKind::MalformedValue, where + "prediction must be 0 or 1");
        }
        if (r.score && !(*r.score >= 0.0 && *r.score <= 1.0)) {
            throw DataError(ErrorKind::MalformedValue, where + "score outside [0, 1]");
        }
    }
    index_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        index_.emplace(ids_[i], i);
    }
}

const MetadataRecord* MetadataTable::find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
}

JoinedView join(std::span<const std::string> ids, const MetadataTable& table) {
    JoinedView view;
    view.rows.reserve(ids.size());
    std::unordered_set<std::string_view> present;
    present.reserve(ids.size());
    for (const auto& id : ids) {
        const auto* rec = table.find(id);
        view.rows.push_back(rec);
        if (rec == nullptr) {
            view.missing_metadata.push_back(id);
        }
        present.insert(id);
    }
    for (const auto& id : table.ids()) {
        if (!present.contains(id)) {
            view.missing_samples.push_back(id);
        }
    }
    return view;
}

JoinedView join(const EmbeddingMatrix& matrix, const MetadataTable& table) {
    return join(matrix.ids(), table);
}

void validate(const ClusterParams& params) {
    if (!(params.eps > 0) || !std::isfinite(params.eps)) {
        throw ParameterError("eps", "must be a finite value > 0");
    }
    if (params.min_samples < 1) {
        throw ParameterError("min_samples", "must be >= 1");
    }
}

ClusterAssignment::ClusterAssignment(std::vector<std::string> ids, std::vector<int> labels,
                                     std::optional<ClusterParams> params)
    : ids_(std::move(ids)), labels_(std::move(labels)), params_(params) {
    if (ids_.size() != labels_.size()) {
        throw DataError(ErrorKind::DimensionMismatch, "assignment ids and labels differ in length");
    }
    validate_ids(ids_);
    if (params_) {
        validate(*params_);
    }
    int max_label = kNoise;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] < kNoise) {
            throw DataError(ErrorKind::InvalidCluster,
                            "row " + std::to_string(i + 1) + ": cluster id below -1");
        }
        max_label = std::max(max_label, labels_[i]);
    }
    cluster_count_ = static_cast<std::size_t>(max_label + 1);
    std::vector<bool> used(cluster_count_, false);
    for (int l : labels_) {
        if (l >= 0) {
            used[static_cast<std::size_t>(l)] = true;
        }
    }
    for (std::size_t k = 0; k < cluster_count_; ++k) {
        if (!used[k]) {
            throw DataError(ErrorKind::InvalidCluster,
                            "cluster ids are not contiguous: " + std::to_string(k) + " has no members");
        }
    }
}

std::size_t ClusterAssignment::noise_count() const noexcept {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), kNoise));
}

std::vector<std::size_t> ClusterAssignment::members(int cluster) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] == cluster) {
            out.push_back(i);
        }
    }
    return out;
}

ReducedCoordinates::ReducedCoordinates(std::vector<std::string> ids, std::vector<Point2> coords)
    : ids_(std::move(ids)), coords_(std::move(coords)) {
    if (ids_.size() != coords_.size()) {
        throw DataError(ErrorKind::DimensionMismatch, "coordinate ids and points differ in length");
    }
    validate_ids(ids_);
    for (std::size_t i = 0; i < coords_.size(); ++i) {
        if (!std::isfinite(coords_[i].x) || !std::isfinite(coords_[i].y)) {
            throw DataError(ErrorKind::NonFiniteValue, "row " + std::to_string(i + 1) + ": non-finite coordinate");
        }
    }
}

} // namespace proxyfair
