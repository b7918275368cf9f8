#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace condcop {

/// Column-major numeric table with named columns.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<std::string> names, std::vector<std::vector<double>> columns);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return columns_.size(); }

    std::span<const double> column(std::size_t k) const;
    double at(std::size_t row, std::size_t col) const { return columns_[col][row]; }

    const std::vector<std::string>& names() const noexcept { return names_; }
    const std::string& name(std::size_t k) const { return names_.at(k); }

    /// Index of a column by name; throws InvalidSpec when absent.
    std::size_t column_index(std::string_view name) const;

    /// New dataset made of the given rows, in order (rows may repeat).
    Dataset select_rows(std::span<const std::size_t> rows) const;

    /// New dataset made of the given columns, in order.
    Dataset select_cols(std::span<const std::size_t> cols) const;

private:
    std::vector<std::string> names_;
    std::vector<std::vector<double>> columns_;
    std::size_t rows_ = 0;
};

}  // namespace condcop
