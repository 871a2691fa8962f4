#pragma once

#include <stdexcept>
#include <string>

namespace arw {

/// Malformed arguments: wrong sizes, negative weights, non-finite values.
class invalid_input_error : public std::invalid_argument {
public:
    explicit invalid_input_error(const std::string& what) : std::invalid_argument(what) {}
};

/// A matrix required to be positive (semi)definite is not.
class not_psd_error : public std::domain_error {
public:
    explicit not_psd_error(const std::string& what) : std::domain_error(what) {}
};

/// Evaluation outside the domain of a barrier-type function (e.g. a dual
/// objective at gamma at or below its pole).
class out_of_domain_error : public std::domain_error {
public:
    explicit out_of_domain_error(const std::string& what) : std::domain_error(what) {}
};

/// Estimator weights sum to zero, so no weighted average exists.
class degenerate_weights_error : public std::runtime_error {
public:
    explicit degenerate_weights_error(const std::string& what) : std::runtime_error(what) {}
};

/// Normal matrix of a local regression is numerically singular.
class rank_deficient_error : public std::runtime_error {
public:
    explicit rank_deficient_error(const std::string& what) : std::runtime_error(what) {}
};

/// Kernel Gram matrix stayed indefinite even after jitter.
class degenerate_gram_error : public std::runtime_error {
public:
    explicit degenerate_gram_error(const std::string& what) : std::runtime_error(what) {}
};

/// An iterative solve exhausted its iteration cap before reaching tolerance.
class convergence_error : public std::runtime_error {
public:
    explicit convergence_error(const std::string& what) : std::runtime_error(what) {}
};

/// A solution violated an invariant it is supposed to satisfy by
/// construction; indicates a bug or severe ill-conditioning, never returned
/// silently.
class internal_consistency_error : public std::logic_error {
public:
    explicit internal_consistency_error(const std::string& what) : std::logic_error(what) {}
};

/// File-system or parse failures while reading datasets and configs.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace arw
