#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace mim {

// Error taxonomy. Estimators throw DataError subtypes when inputs are
// unusable and FitError subtypes when a fit cannot be produced; the CLI
// maps these onto exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : Error {
    using Error::Error;
};
struct FitError : Error {
    using Error::Error;
};

struct MalformedRow : DataError {
    MalformedRow(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line(line) {}
    std::size_t line;
};
struct NonMonotoneTimestamp : DataError {
    NonMonotoneTimestamp(std::size_t line)
        : DataError("line " + std::to_string(line) + ": timestamp decreases"), line(line) {}
    std::size_t line;
};
struct UnknownEventKind : DataError {
    UnknownEventKind(std::size_t line, char c)
        : DataError("line " + std::to_string(line) + ": unknown event kind '" + std::string(1, c) + "'"),
          line(line) {}
    std::size_t line;
};
struct NoQuotes : DataError {
    using DataError::DataError;
};
struct OutOfSession : DataError {
    using DataError::DataError;
};
struct EmptySession : DataError {
    using DataError::DataError;
};
struct TooFewOrders : DataError {
    using DataError::DataError;
};
struct BinMismatch : DataError {
    using DataError::DataError;
};
struct ConfigInvalid : DataError {
    using DataError::DataError;
};

struct InsufficientData : FitError {
    using FitError::FitError;
};
struct InsufficientRanks : FitError {
    using FitError::FitError;
};
struct InsufficientSequences : FitError {
    using FitError::FitError;
};
struct NonPositiveMean : FitError {
    using FitError::FitError;
};
struct TooFewTailSamples : FitError {
    using FitError::FitError;
};
struct UnsupportedBeta : FitError {
    using FitError::FitError;
};
struct FitUnavailable : FitError {
    using FitError::FitError;
};

inline constexpr std::int64_t ns_per_sec = 1'000'000'000LL;
inline constexpr std::int64_t ns_per_min = 60 * ns_per_sec;
inline constexpr std::int64_t ns_per_day = 86'400 * ns_per_sec;

// Civil-date conversion (proleptic Gregorian), days since 1970-01-01.
constexpr std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
    int year;
    unsigned month;
    unsigned day;
};

constexpr CivilDate civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return {static_cast<int>(y + (m <= 2)), m, d};
}

}  // namespace mim
