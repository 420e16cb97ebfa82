#pragma once

#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace dsteer {

/// 17 significant digits, locale independent.
std::string format_number(double v);

/// Comma-separated writer with a mandatory header row.
class CsvWriter {
public:
    CsvWriter(std::ostream& os, std::vector<std::string> header);

    template <class... Cells>
    void row(const Cells&... cells) {
        std::size_t i = 0;
        ((write_cell(cells, i++)), ...);
        os_ << '\n';
    }

    std::size_t columns() const noexcept { return header_.size(); }

private:
    void sep(std::size_t i) {
        if (i > 0) os_ << ',';
    }
    void write_cell(double v, std::size_t i) {
        sep(i);
        os_ << format_number(v);
    }
    template <class T>
    requires std::is_integral_v<T> void write_cell(T v, std::size_t i) {
        sep(i);
        os_ << std::to_string(v);
    }
    void write_cell(std::string_view s, std::size_t i) {
        sep(i);
        os_ << s;
    }
    void write_cell(const std::string& s, std::size_t i) { write_cell(std::string_view(s), i); }
    void write_cell(const char* s, std::size_t i) { write_cell(std::string_view(s), i); }

    std::ostream& os_;
    std::vector<std::string> header_;
};

}  // namespace dsteer
