#include <torch/torch.h>

#include "djescc/pipeline.hpp"

int main(int argc, char** argv) {
    torch::set_num_threads(std::max(1u, std::thread::hardware_concurrency()));
    return djescc::run_cli(argc, argv);
}
