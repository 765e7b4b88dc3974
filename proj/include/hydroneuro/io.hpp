#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace hydroneuro {

inline constexpr int schema_version = 1;

/// Shortest decimal that round-trips to the same double.
std::string format_double(double x);
std::string join(const std::vector<double>& xs, const std::string& sep = ",");

/// Writes to `<path>.partial` and renames to `path` on commit(). A file that
/// is never committed stays marked as partial.
class ArtifactFile {
public:
    explicit ArtifactFile(std::filesystem::path path);
    ArtifactFile(const ArtifactFile&) = delete;
    ArtifactFile& operator=(const ArtifactFile&) = delete;
    ~ArtifactFile();

    std::ofstream& stream() { return out_; }
    void commit();

private:
    std::filesystem::path path_;
    std::filesystem::path partial_;
    std::ofstream out_;
    bool committed_ = false;
};

/// CSV with a fixed header; numbers are written with format_double.
class CsvWriter {
public:
    CsvWriter(std::filesystem::path path, const std::vector<std::string>& header);
    CsvWriter& row(const std::vector<double>& values);
    void commit() { file_.commit(); }

private:
    ArtifactFile file_;
    std::size_t columns_;
};

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace hydroneuro
