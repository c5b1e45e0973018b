#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spanprof {

// Order-independent floating-point summation: keeps the running sum as a
// list of non-overlapping partials (Shewchuk) so value() is the correctly
// rounded sum of everything added, whatever the insertion order.
class ExactSum {
public:
    void add(double x);
    void add(const ExactSum& other);
    double value() const;

private:
    std::vector<double> partials_;
};

double exact_sum(std::span<const double> values);

double mean(std::span<const double> values);
// n-1 denominator; 0 for fewer than two values.
double sample_stddev(std::span<const double> values);
// Sample standard deviation over mean; 0 when all values are equal.
double coefficient_of_variation(std::span<const double> values);

// Linear-interpolation quantile (Hyndman-Fan type 7) of unsorted values.
double quantile(std::vector<double> values, double q);

struct FenceResult {
    double lower = 0.0;
    double upper = 0.0;
    std::vector<double> kept;
    std::size_t total = 0;
};

// Tukey fences: keeps values within [Q1 - k*IQR, Q3 + k*IQR].
FenceResult tukey_fence(std::span<const double> values, double k = 1.5);

// Throws DegenerateVariance for fewer than 3 pairs or zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

struct ConfidenceInterval {
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

// Student-t interval for the mean at the given confidence level.
ConfidenceInterval mean_confidence_interval(std::span<const double> values, double level = 0.95);

}  // namespace spanprof
