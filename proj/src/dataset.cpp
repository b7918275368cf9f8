#include "condcop/dataset.hpp"

#include "condcop/errors.hpp"

#include <cmath>

namespace condcop {

Dataset::Dataset(std::vector<std::string> names, std::vector<std::vector<double>> columns)
    : names_(std::move(names)), columns_(std::move(columns)) {
    if (names_.size() != columns_.size()) {
        throw DataError("dataset: " + std::to_string(names_.size()) + " names for " +
                        std::to_string(columns_.size()) + " columns");
    }
    rows_ = columns_.empty() ? 0 : columns_.front().size();
    for (std::size_t k = 0; k < columns_.size(); ++k) {
        if (columns_[k].size() != rows_) {
            throw DataError("dataset: column '" + names_[k] + "' has " +
                            std::to_string(columns_[k].size()) + " rows, expected " +
                            std::to_string(rows_));
        }
        for (std::size_t i = 0; i < rows_; ++i) {
            if (std::isnan(columns_[k][i])) {
                throw DataError("dataset: NaN in column '" + names_[k] + "' at row " +
                                std::to_string(i));
            }
        }
    }
}

std::span<const double> Dataset::column(std::size_t k) const {
    if (k >= columns_.size()) {
        throw InvalidSpec("column index " + std::to_string(k) + " out of range (" +
                          std::to_string(columns_.size()) + " columns)");
    }
    return columns_[k];
}

std::size_t Dataset::column_index(std::string_view name) const {
    for (std::size_t k = 0; k < names_.size(); ++k) {
        if (names_[k] == name) return k;
    }
    throw InvalidSpec("no column named '" + std::string(name) + "'");
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
    std::vector<std::vector<double>> cols(columns_.size());
    for (std::size_t k = 0; k < columns_.size(); ++k) {
        cols[k].reserve(rows.size());
        for (std::size_t r : rows) cols[k].push_back(columns_[k].at(r));
    }
    return Dataset(names_, std::move(cols));
}

Dataset Dataset::select_cols(std::span<const std::size_t> cols) const {
    std::vector<std::string> names;
    std::vector<std::vector<double>> out;
    for (std::size_t k : cols) {
        names.push_back(names_.at(k));
        out.push_back(columns_.at(k));
    }
    return Dataset(std::move(names), std::move(out));
}

}  // namespace condcop
