#include <iostream>

#include "shapes_doc.hpp"

int main() {
    std::cout << gtdetect::tools::parameter_shape_table();
    return 0;
}
