#pragma once

// Matrices on the wire: {"rows": r, "cols": c, "re": [...], "im": [...]},
// with both arrays flattened row-major.

#include <nlohmann/json.hpp>

#include "polrouter/polmath.hpp"

namespace polrouter {

template <typename Derived>
nlohmann::json matrix_to_json(const Eigen::MatrixBase<Derived>& m) {
    nlohmann::json re = nlohmann::json::array();
    nlohmann::json im = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            re.push_back(std::real(m(r, c)));
            im.push_back(std::imag(m(r, c)));
        }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"re", re}, {"im", im}};
}

inline ComplexMatrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& re = j.at("re");
    const auto& im = j.at("im");
    if (rows <= 0 || cols <= 0 || re.size() != static_cast<std::size_t>(rows * cols) || im.size() != re.size())
        throw UsageError("matrix JSON: re/im length does not match rows*cols");
    ComplexMatrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto k = static_cast<std::size_t>(r * cols + c);
            m(r, c) = cplx(re[k].get<double>(), im[k].get<double>());
        }
    return m;
}

/// chi with Pauli labels attached; "matrix" follows the generic layout above.
inline nlohmann::json process_to_json(const ProcessMatrix& chi) {
    return {{"basis", {"I", "X", "Y", "Z"}},
            {"matrix", matrix_to_json(chi.matrix())},
            {"trace_preserving", chi.flagged_trace_preserving()}};
}

inline ProcessMatrix process_from_json(const nlohmann::json& j) {
    const ComplexMatrix m = matrix_from_json(j.at("matrix"));
    if (m.rows() != 4 || m.cols() != 4) throw UsageError("process JSON must hold a 4x4 matrix");
    return ProcessMatrix::from_matrix(m, j.value("trace_preserving", false));
}

}  // namespace polrouter
