#ifndef PROXYFAIR_IO_HPP
#define PROXYFAIR_IO_HPP

#include "proxyfair/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

/**
 * @file io.hpp
 *
 * @brief File formats for embeddings, metadata, coordinates, assignments and subsets.
 *
 * Embedding CSV: header `id,e0,...,e{d-1}`, one decimal row per sample.
 *
 * femb (little-endian): magic `FEMB`, u32 version = 1, u64 n, u64 d, then
 * n*d f32 values row-major, then for each row a u16 byte length followed by
 * the UTF-8 id bytes.
 *
 * All loaders throw DataError with a kind naming the malformation.
 */

namespace proxyfair {

enum class EmbeddingFormat { Csv, Femb };

/// `.femb` selects the binary format; anything else is CSV.
EmbeddingFormat format_from_path(const std::filesystem::path& path);

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, EmbeddingFormat format);
void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path, EmbeddingFormat format);

/// Exact byte size of the femb encoding of `m`.
std::size_t femb_size(const EmbeddingMatrix& m);

/// Header `id` followed by any subset of `gender,age,label,prediction,score`; empty cell = absent.
MetadataTable load_metadata(const std::filesystem::path& path);
void save_metadata(const MetadataTable& t, const std::filesystem::path& path);

ClusterAssignment load_assignment(const std::filesystem::path& path);
void save_assignment(const ClusterAssignment& a, const std::filesystem::path& path);

ReducedCoordinates load_coordinates(const std::filesystem::path& path);
void save_coordinates(const ReducedCoordinates& c, const std::filesystem::path& path);

/// Subset CSV `id,cluster`; the cluster cell is empty when the selection carries no clusters.
void save_subset(const SubsetSelection& s, const std::filesystem::path& path);
std::vector<std::string> load_subset_ids(const std::filesystem::path& path);

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

/// Writes a CSV with the given header and numeric columns of equal length.
void save_numeric_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& columns);

} // namespace proxyfair

#endif
