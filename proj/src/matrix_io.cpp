#include "attndiff/matrix_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace attndiff {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void save_matrix_csv(const MatrixView& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << m.rows() << ',' << m.cols() << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) os << ',';
            os << format_double(m(i, j));
        }
        os << '\n';
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

Matrix load_matrix_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("matrix csv: empty file");
    Index rows = 0, cols = 0;
    {
        std::istringstream hs(line);
        char comma;
        if (!(hs >> rows >> comma >> cols) || comma != ',')
            throw std::runtime_error("matrix csv: bad header '" + line + "'");
    }
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        if (!std::getline(is, line))
            throw std::runtime_error("matrix csv: missing row " + std::to_string(i));
        std::istringstream ls(line);
        std::string cell;
        for (Index j = 0; j < cols; ++j) {
            if (!std::getline(ls, cell, ','))
                throw std::runtime_error("matrix csv: short row " + std::to_string(i));
            m(i, j) = std::stod(cell);
        }
    }
    return m;
}

} // namespace attndiff
