#include "gazekit/image.hpp"

// Image is header-only; this translation unit only anchors the template
// instantiations used across the library.

namespace gaze {

template class Image<std::uint8_t>;
template class Image<std::uint16_t>;
template class Image<double>;

} // namespace gaze
