pub mod lloyd_oracle;
