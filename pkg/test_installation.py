#!/usr/bin/env python3
"""
Test script to verify the installation and basic functionality
"""

import sys
import importlib
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

def test_imports():
    """Test if all required packages can be imported"""
    print("🔍 Testing package imports...")

    required_packages = [
        'numpy',
        'pandas',
        'scipy',
        'sklearn',
        'dotenv',
        'json',
        'logging'
    ]

    failed_imports = []

    for package in required_packages:
        try:
            importlib.import_module(package)
            print(f"✅ {package}")
        except ImportError as e:
            print(f"❌ {package}: {e}")
            failed_imports.append(package)

    return len(failed_imports) == 0

def test_configuration():
    """Test configuration loading"""
    print("\n⚙️  Testing configuration...")

    try:
        from config import Config, active_config, config_from_mapping
        print(f"✅ Config loaded (version {Config.VERSION}, {active_config().THREADS} default threads)")

        config = config_from_mapping({'body': 'ball', 'dimension': 2, 'radius': 0.5, 'torus_side': 4})
        print(f"✅ Example experiment validated (probe net radius {config.net_radius:.4g})")

        return True
    except Exception as e:
        print(f"❌ Configuration test failed: {e}")
        return False

def test_pipelines():
    """Test experiment pipelines"""
    print("\n🧭 Testing experiment pipelines...")

    try:
        from experiments import ExperimentOrchestrator
        orchestrator = ExperimentOrchestrator(threads=1)
        print("✅ Experiment orchestrator imported successfully")

        status = orchestrator.get_status()
        print(f"✅ Pipeline status check successful: {len(status['pipelines'])} pipelines registered")

        return True
    except Exception as e:
        print(f"❌ Pipeline test failed: {e}")
        return False

def test_constants():
    """Test the analytic constants"""
    print("\n🔣 Testing analytic constants...")

    try:
        from models.analytic import analytic_constants
        constants = analytic_constants(1e-12, 0.3)

        if abs(constants.xi - 1.79556) < 5e-6:
            print(f"✅ xi = {constants.xi:.6f}, xi0 = {constants.xi0:.6f}")
            return True
        else:
            print(f"❌ xi = {constants.xi} is off the expected 1.79556")
            return False
    except Exception as e:
        print(f"❌ Constants test failed: {e}")
        return False

def main():
    """Main test function"""
    print("🧪 Torus Cover - Installation Test")
    print("=" * 70)

    tests = [
        ("Package Imports", test_imports),
        ("Configuration", test_configuration),
        ("Experiment Pipelines", test_pipelines),
        ("Analytic Constants", test_constants)
    ]

    passed = 0
    total = len(tests)

    for test_name, test_func in tests:
        try:
            if test_func():
                passed += 1
        except Exception as e:
            print(f"❌ {test_name} test crashed: {e}")

    print("\n" + "=" * 70)
    print(f"📊 Test Results: {passed}/{total} tests passed")

    if passed == total:
        print("🎉 All tests passed! The engine is ready to run.")
        print("🚀 Run 'python run.py verify-lemmas' to check the inequality ledger")
    else:
        print("⚠️  Some tests failed. Please check the errors above.")
        print("💡 Make sure all dependencies are installed: pip install -r requirements.txt")

    return passed == total

if __name__ == '__main__':
    success = main()
    sys.exit(0 if success else 1)
