#include "feeder_nilm/matrix.hpp"

#include "feeder_nilm/error.hpp"

namespace feeder_nilm {

void Matrix::append_row(std::span<const double> values) {
    if (values.size() != cols_) {
        throw InvalidInput("matrix row width mismatch");
    }
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

}  // namespace feeder_nilm
