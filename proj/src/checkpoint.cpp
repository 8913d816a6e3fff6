#include "mmql/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "mmql/errors.hpp"

namespace mmql {

std::string format_double(double x) {
    // Shortest %g rendering that parses back to the same bits. Low precisions
    // can produce longer strings than higher ones ("5e+01" vs "50"), so scan
    // them all and keep the shortest exact one.
    char buf[40];
    std::string best;
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, x);
        double back = std::strtod(buf, nullptr);
        bool exact = back == x || (back != back && x != x);
        if (exact && (best.empty() || std::strlen(buf) < best.size())) best = buf;
    }
    if (!best.empty()) return best;
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

static void write_doubles_le(std::ostream& os, const double* p, size_t n) {
    std::vector<unsigned char> buf(n * 8);
    for (size_t i = 0; i < n; ++i) {
        uint64_t bits;
        std::memcpy(&bits, &p[i], 8);
        for (int b = 0; b < 8; ++b) buf[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

static void read_doubles_le(std::istream& is, double* p, size_t n) {
    std::vector<unsigned char> buf(n * 8);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<size_t>(is.gcount()) != buf.size())
        throw DataError("checkpoint: truncated payload");
    for (size_t i = 0; i < n; ++i) {
        uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<uint64_t>(buf[i * 8 + b]) << (8 * b);
        std::memcpy(&p[i], &bits, 8);
    }
}

void save_checkpoint(const std::string& path,
                     const std::map<std::string, std::string>& meta,
                     const ParamStore& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot open '" + path + "' for writing");
    os << "mmql-checkpoint v1\n";
    os << "meta " << meta.size() << "\n";
    for (auto& [k, v] : meta) {
        if (k.find_first_of("\t\n") != std::string::npos ||
            v.find_first_of("\t\n") != std::string::npos)
            throw DataError("checkpoint: meta keys/values must not contain tabs or newlines");
        os << k << "\t" << v << "\n";
    }
    os << "params " << params.count() << "\n";
    size_t offset = 0;
    for (auto& [name, m] : params) {
        os << name << "\t" << offset << "\t" << m.rows << "\t" << m.cols << "\n";
        offset += m.size();
    }
    os << "payload\n";
    for (auto& [name, m] : params) write_doubles_le(os, m.d.data(), m.size());
    if (!os) throw DataError("checkpoint: write failed for '" + path + "'");
}

static std::string getline_checked(std::istream& is, const std::string& path) {
    std::string line;
    if (!std::getline(is, line)) throw DataError("checkpoint: truncated manifest in '" + path + "'");
    return line;
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open '" + path + "'");
    if (getline_checked(is, path) != "mmql-checkpoint v1")
        throw DataError("checkpoint: bad format line in '" + path + "'");

    Checkpoint ck;
    size_t n_meta = 0;
    {
        std::istringstream ss(getline_checked(is, path));
        std::string tag;
        if (!(ss >> tag >> n_meta) || tag != "meta")
            throw DataError("checkpoint: expected meta count in '" + path + "'");
    }
    for (size_t i = 0; i < n_meta; ++i) {
        std::string line = getline_checked(is, path);
        size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError("checkpoint: malformed meta line in '" + path + "'");
        ck.meta[line.substr(0, tab)] = line.substr(tab + 1);
    }

    size_t n_params = 0;
    {
        std::istringstream ss(getline_checked(is, path));
        std::string tag;
        if (!(ss >> tag >> n_params) || tag != "params")
            throw DataError("checkpoint: expected params count in '" + path + "'");
    }
    struct Entry {
        std::string name;
        size_t offset;
        int rows, cols;
    };
    std::vector<Entry> entries;
    size_t total = 0;
    for (size_t i = 0; i < n_params; ++i) {
        std::istringstream ss(getline_checked(is, path));
        Entry e;
        if (!(ss >> e.name >> e.offset >> e.rows >> e.cols) || e.rows < 0 || e.cols < 0)
            throw DataError("checkpoint: malformed param index line in '" + path + "'");
        if (e.offset != total)
            throw DataError("checkpoint: non-contiguous param offsets in '" + path + "'");
        total += static_cast<size_t>(e.rows) * e.cols;
        entries.push_back(std::move(e));
    }
    if (getline_checked(is, path) != "payload")
        throw DataError("checkpoint: missing payload marker in '" + path + "'");

    for (auto& e : entries) {
        Mat& m = ck.params.add(e.name, e.rows, e.cols);
        read_doubles_le(is, m.d.data(), m.size());
    }
    char extra;
    if (is.read(&extra, 1) && is.gcount() == 1)
        throw DataError("checkpoint: trailing bytes after payload in '" + path + "'");
    return ck;
}

}  // namespace mmql
