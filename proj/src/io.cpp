#include "hydroneuro/io.hpp"

#include <array>
#include <charconv>
#include <stdexcept>

namespace hydroneuro {

std::string format_double(double x) {
    std::array<char, 64> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    if (r.ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf.data(), r.ptr);
}

std::string join(const std::vector<double>& xs, const std::string& sep) {
    std::string s;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        if (k) s += sep;
        s += format_double(xs[k]);
    }
    return s;
}

ArtifactFile::ArtifactFile(std::filesystem::path path) : path_(std::move(path)) {
    partial_ = path_;
    partial_ += ".partial";
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    out_.open(partial_, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open " + partial_.string() + " for writing");
}

ArtifactFile::~ArtifactFile() {
    if (!committed_ && out_.is_open()) out_.close();
}

void ArtifactFile::commit() {
    if (committed_) return;
    out_.close();
    if (!out_) throw std::runtime_error("write failed for " + partial_.string());
    std::filesystem::rename(partial_, path_);
    committed_ = true;
}

CsvWriter::CsvWriter(std::filesystem::path path, const std::vector<std::string>& header)
    : file_(std::move(path)), columns_(header.size()) {
    auto& o = file_.stream();
    for (std::size_t k = 0; k < header.size(); ++k) o << (k ? "," : "") << header[k];
    o << '\n';
}

CsvWriter& CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != columns_) throw std::logic_error("CsvWriter: row width does not match the header");
    file_.stream() << join(values) << '\n';
    return *this;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    ArtifactFile f(path);
    f.stream() << text;
    f.commit();
}

}  // namespace hydroneuro
