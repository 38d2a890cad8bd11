#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <ostream>
#include <string>

namespace tacache {

/// Shortest decimal string that parses back to exactly `x`.
inline std::string format_real(double x) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    if (ec != std::errc{}) return "nan";
    return std::string(buf.data(), ptr);
}

/// Minimal comma-separated row writer.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    CsvWriter& operator<<(double x) { return cell(format_real(x)); }
    CsvWriter& operator<<(int x) { return cell(std::to_string(x)); }
    CsvWriter& operator<<(long x) { return cell(std::to_string(x)); }
    CsvWriter& operator<<(long long x) { return cell(std::to_string(x)); }
    CsvWriter& operator<<(unsigned long x) { return cell(std::to_string(x)); }
    CsvWriter& operator<<(unsigned long long x) { return cell(std::to_string(x)); }
    CsvWriter& operator<<(const std::string& s) { return cell(s); }
    CsvWriter& operator<<(const char* s) { return cell(s); }

    void end_row() {
        os_ << '\n';
        first_ = true;
    }

private:
    CsvWriter& cell(const std::string& s) {
        if (!first_) os_ << ',';
        os_ << s;
        first_ = false;
        return *this;
    }

    std::ostream& os_;
    bool first_ = true;
};

} // namespace tacache
