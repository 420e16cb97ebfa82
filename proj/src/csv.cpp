#include "dsteer/csv.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

namespace dsteer {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::ostream& os, std::vector<std::string> header) : os_(os), header_(std::move(header)) {
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (i > 0) os_ << ',';
        os_ << header_[i];
    }
    os_ << '\n';
}

}  // namespace dsteer
