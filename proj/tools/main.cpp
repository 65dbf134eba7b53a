#include "hazeprior/cli.hpp"

int main(int argc, char** argv)
{
    return hazeprior::run_cli(argc, argv);
}
