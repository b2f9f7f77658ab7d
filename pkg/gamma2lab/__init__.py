VERSION = "1.0.0"
BRANCH = 'master'
BUILD_DATE = '10/19/2026'
