#pragma once

namespace pmri {

/// Execution policy for the data-parallel kernels. Every parallel kernel has
/// a serial twin with the same loop order, so the two policies produce
/// bit-identical results; tests cross-check them and the bench tool times
/// them against each other.
enum class Exec { Serial, OpenMP };

/// Caps the number of OpenMP threads used by pmri kernels (0 = runtime
/// default). Thread count never changes results: parallel loops own disjoint
/// output ranges and keep the serial reduction order within each range.
void set_max_threads(int n);
int max_threads();

}  // namespace pmri
