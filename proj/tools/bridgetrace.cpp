#include <bridgetrace/cli.hpp>

int main(int argc, char** argv)
{
    return bridgetrace::cli::run(argc, argv, std::cout, std::cerr);
}
