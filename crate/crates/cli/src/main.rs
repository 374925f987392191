fn main() {
    println!("ada3diff");
}
